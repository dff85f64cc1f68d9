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

#include "fixtures.hpp"

#include <unistd.h>

#include <benchmark/benchmark.h>

#include <map>
#include <mutex>

#include "brickstore/bag.hpp"
#include "brickstore/recorder.hpp"

namespace brickstore::bench {
namespace {

struct Scratch {
  std::filesystem::path path;

  Scratch() {
    const char* base = std::getenv("BRICKSTORE_BENCH_TMP");
    path = std::filesystem::path(base ? base : std::filesystem::temp_directory_path().string()) /
           ("brickstore-bench-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

std::mutex mu;
std::map<std::string, std::filesystem::path> containers;
std::map<std::string, std::filesystem::path> bags;

}  // namespace

std::filesystem::path scratch_dir() {
  static Scratch scratch;
  return scratch.path;
}

const std::filesystem::path& cached_container(const std::string& name, const Workload& w) {
  std::lock_guard lock(mu);
  auto it = containers.find(name);
  if (it == containers.end()) {
    const auto root = scratch_dir() / name;
    RecorderOptions opts;
    opts.durability = Durability::kBuffered;
    SynthSource src(w);
    record(src, root, opts);
    it = containers.emplace(name, root).first;
  }
  return it->second;
}

const std::filesystem::path& cached_bag(const std::string& name, const Workload& w) {
  std::lock_guard lock(mu);
  auto it = bags.find(name);
  if (it == bags.end()) {
    const auto path = scratch_dir() / (name + ".bag");
    BagWriter writer(path);
    for (const auto& t : w.topics) {
      writer.add_connection(t.name, t.type);
    }
    SynthSource src(w);
    while (auto m = src.next()) {
      writer.write(decode_synth_trailer(m->payload)->topic_index, m->timestamp, m->payload);
    }
    writer.close();
    it = bags.emplace(name, path).first;
  }
  return it->second;
}

}  // namespace brickstore::bench

BENCHMARK_MAIN();
