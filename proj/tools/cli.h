// Copyright 2026 The CDVM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef CDVM_TOOLS_CLI_H_
#define CDVM_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace cdvm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitSolver = 4;

// Runs one invocation of the command-line tool. args[0] is the program name.
// Results go to out, diagnostics and log lines to err.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cdvm::cli

#endif  // CDVM_TOOLS_CLI_H_
