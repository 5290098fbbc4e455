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

#ifndef LINEFOCUS_TESTS_SUPPORT_EXPECT_ERROR_H_
#define LINEFOCUS_TESTS_SUPPORT_EXPECT_ERROR_H_

#include <optional>

#include "linefocus/error.h"

namespace linefocus::testing {

// The code of the Error thrown by `fn`, or nullopt when nothing is thrown.
template <typename Fn>
std::optional<ErrorCode> error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace linefocus::testing

#endif  // LINEFOCUS_TESTS_SUPPORT_EXPECT_ERROR_H_
