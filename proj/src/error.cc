// Copyright 2026 The linefocus Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "linefocus/error.h"

namespace linefocus {

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return ErrorCategory::kConfig;
    case ErrorCode::kSequenceTooLong:
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kDumpMissing:
    case ErrorCode::kBadMagic:
    case ErrorCode::kVersionUnsupported:
    case ErrorCode::kTruncatedPayload:
    case ErrorCode::kProtocolError:
    case ErrorCode::kRemoteError:
    case ErrorCode::kGranularityUnsupported:
      return ErrorCategory::kBackend;
    default:
      return ErrorCategory::kData;
  }
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kMalformedRecord: return "MalformedRecord";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kVulnLineOutOfRange: return "VulnLineOutOfRange";
    case ErrorCode::kEmptyVulnSet: return "EmptyVulnSet";
    case ErrorCode::kEmptySample: return "EmptySample";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kHighlightOutOfRange: return "HighlightOutOfRange";
    case ErrorCode::kOffsetOutOfBounds: return "OffsetOutOfBounds";
    case ErrorCode::kEmptyText: return "EmptyText";
    case ErrorCode::kSequenceTooLong: return "SequenceTooLong";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kDumpMissing: return "DumpMissing";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kRemoteError: return "RemoteError";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kGranularityUnsupported: return "GranularityUnsupported";
    case ErrorCode::kTokenCountMismatch: return "TokenCountMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kHighlightedIsInstruction: return "HighlightedIsInstruction";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kLineOutOfRange: return "LineOutOfRange";
    case ErrorCode::kMissingTieContext: return "MissingTieContext";
    case ErrorCode::kMissingTruth: return "MissingTruth";
    case ErrorCode::kEmptyBucketEdges: return "EmptyBucketEdges";
    case ErrorCode::kInvalidBucketEdges: return "InvalidBucketEdges";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

}  // namespace linefocus
