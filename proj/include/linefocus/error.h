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

#ifndef LINEFOCUS_ERROR_H_
#define LINEFOCUS_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace linefocus {

// Every failure the library reports carries one of these codes. Tests match
// on the code; the CLI maps the code's category onto an exit status.
enum class ErrorCode {
  // corpus
  kIo,
  kMalformedRecord,
  kDuplicateId,
  kVulnLineOutOfRange,
  kEmptyVulnSet,
  kEmptySample,
  kInsufficientSamples,
  // prompting
  kHighlightOutOfRange,
  kOffsetOutOfBounds,
  // backend
  kEmptyText,
  kSequenceTooLong,
  kBackendUnavailable,
  kDumpMissing,
  kBadMagic,
  kVersionUnsupported,
  kTruncatedPayload,
  kProtocolError,
  kRemoteError,
  kEmptyCorpus,
  kGranularityUnsupported,
  // reduction
  kTokenCountMismatch,
  kShapeMismatch,
  kIndexOutOfRange,
  kHighlightedIsInstruction,
  // classifier
  kDimensionMismatch,
  kEmptyTrainingSet,
  kLengthMismatch,
  // scoring
  kLineOutOfRange,
  kMissingTieContext,
  // evaluation
  kMissingTruth,
  kEmptyBucketEdges,
  kInvalidBucketEdges,
  // cli
  kConfig,
};

enum class ErrorCategory { kConfig, kBackend, kData };

ErrorCategory category_of(ErrorCode code);
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }
  ErrorCategory category() const { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace linefocus

#endif  // LINEFOCUS_ERROR_H_
