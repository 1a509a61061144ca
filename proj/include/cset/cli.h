/*
 * Copyright 2026 The cset Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// The `cset` command-line front end.
//
//   cset ingest      validate a score file, convert it, optionally split it
//   cset synth       write a synthetic problem
//   cset fit-temp    fit a softmax temperature to logits
//   cset tune        choose k_reg and lambda on tuning scores
//   cset calibrate   fit a conformal model
//   cset predict     write prediction sets
//   cset evaluate    coverage, size and stratified tables of a model
//   cset experiment  repeated random-split trials and every report table
//
// Options can also come from an INI/TOML file given with --config; flags on
// the command line win. Options of a subcommand live in the section of the
// same name, e.g. "[experiment]".

#ifndef CSET_CLI_H_
#define CSET_CLI_H_

#include <ostream>

namespace cset {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitData = 4;
inline constexpr int kExitInternal = 1;

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace cset

#endif  // CSET_CLI_H_
