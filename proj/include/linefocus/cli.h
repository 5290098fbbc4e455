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

#ifndef LINEFOCUS_CLI_H_
#define LINEFOCUS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

#include "linefocus/error.h"

namespace linefocus {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitData = 4;

int exit_code_for(ErrorCategory category);

// args excludes the program name. Diagnostics go to err as one line.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace linefocus

#endif  // LINEFOCUS_CLI_H_
