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

#include <filesystem>

#include "brickstore/synth.hpp"

namespace brickstore::bench {

// Scratch directory under BRICKSTORE_BENCH_TMP (or the system temp dir),
// removed at exit.
std::filesystem::path scratch_dir();

// Container recorded from `w` once per process and cached by name.
const std::filesystem::path& cached_container(const std::string& name, const Workload& w);

// Bag holding the same messages as cached_container(name, w).
const std::filesystem::path& cached_bag(const std::string& name, const Workload& w);

}  // namespace brickstore::bench
