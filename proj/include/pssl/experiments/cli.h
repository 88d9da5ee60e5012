// Copyright 2026 The pssl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PSSL_EXPERIMENTS_CLI_H_
#define PSSL_EXPERIMENTS_CLI_H_

#include <string>
#include <vector>

namespace pssl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs the command-line tool on `args` (args[0] is the program name).
// Values from a `--config` TOML file ([global] and the subcommand's section)
// are applied after the flags and take precedence over them.
int RunCli(const std::vector<std::string>& args);

}  // namespace pssl

#endif  // PSSL_EXPERIMENTS_CLI_H_
