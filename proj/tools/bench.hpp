// Copyright 2026 The Brickstore Authors
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

#pragma once

#include <string>
#include <vector>

namespace brickstore::cli {

struct BenchOptions {
  std::string scenario;
  std::string container;
  std::string workload_file;
  std::string preset = "drone";
  double duration = 30.0;
  uint64_t seed = 1;
  std::string bag;            // offline-topic baseline; exported if absent
  std::string endpoint;       // query-* and concurrent: use a running server
  std::vector<std::string> topics;
  size_t requests = 30;
  double rate_hz = 1.0;       // 0 sends back to back
  double throttle = 0;        // in-process server link cap, bytes/s
  double assume_bandwidth = 0;
  double time_len = 1.0;      // latest window, seconds
  double window = 5.0;        // history window, seconds
  double target = 1.0;        // auto response time, seconds
  size_t points = 20;
  size_t repeat = 5;
  std::vector<size_t> clients = {1, 2, 4, 8, 16};
  bool json = false;
  std::string report;         // also append JSON lines here
};

std::vector<std::string> bench_scenarios();
int run_bench(const BenchOptions& options);

}  // namespace brickstore::cli
