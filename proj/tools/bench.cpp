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

#include "bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "brickstore/baseline.hpp"
#include "brickstore/error.hpp"
#include "brickstore/net.hpp"
#include "brickstore/protocol.hpp"
#include "brickstore/query.hpp"
#include "common.hpp"

namespace brickstore::cli {
namespace {

using namespace std::chrono_literals;
using nlohmann::json;

class Reporter {
 public:
  explicit Reporter(const BenchOptions& options) : json_(options.json) {
    if (!options.report.empty()) {
      file_.open(options.report, std::ios::app);
      if (!file_) {
        throw Error(ErrorCode::kIoError, "cannot open report file " + options.report);
      }
    }
  }

  void add(json row) {
    if (json_) {
      std::cout << row.dump() << "\n";
    }
    if (file_.is_open()) {
      file_ << row.dump() << "\n";
    }
    rows_.push_back(std::move(row));
  }

  void table() const {
    if (json_ || rows_.empty()) {
      return;
    }
    fmt::print("{:<16} {:<28} {:>6} {:>10} {:>10} {:>10} {:>10} {:>12}  {}\n", "scenario", "case", "n", "mean ms",
               "p50 ms", "p99 ms", "messages", "bytes", "notes");
    for (const auto& r : rows_) {
      const auto& lat = r.at("latency");
      fmt::print("{:<16} {:<28} {:>6} {:>10.3f} {:>10.3f} {:>10.3f} {:>10} {:>12}  {}\n",
                 r.at("scenario").get<std::string>(), r.at("case").get<std::string>(),
                 lat.at("count").get<size_t>(), lat.at("mean_ms").get<double>(), lat.at("p50_ms").get<double>(),
                 lat.at("p99_ms").get<double>(), r.value("messages", uint64_t{0}),
                 format_bytes(r.value("bytes", uint64_t{0})), r.value("notes", std::string{}));
    }
  }

 private:
  bool json_;
  std::ofstream file_;
  std::vector<json> rows_;
};

json make_row(const std::string& scenario, const std::string& label, const std::vector<double>& samples,
              uint64_t messages, uint64_t bytes) {
  return {{"scenario", scenario},
          {"case", label},
          {"latency", summarize(samples)},
          {"messages", messages},
          {"bytes", bytes}};
}

struct Prepared {
  std::filesystem::path root;
  ContainerMetadata meta;
  std::vector<std::string> topics;
};

Prepared prepare(const BenchOptions& o) {
  if (o.container.empty()) {
    throw Error(ErrorCode::kBadParam, "--container is required");
  }
  Prepared p;
  p.root = o.container;
  const bool existed = std::filesystem::exists(layout::metadata_path(p.root));
  if (!existed) {
    spdlog::info("generating container {}", p.root.string());
  }
  p.meta = ensure_container(p.root, resolve_workload(o.workload_file, o.preset, o.duration, o.seed));
  p.topics = o.topics;
  if (p.topics.empty()) {
    for (const auto& t : p.meta.topics) {
      p.topics.push_back(t.name);
    }
  }
  return p;
}

// Topic with the fewest payload bytes.
std::string smallest_topic(const ContainerMetadata& meta) {
  const auto it = std::min_element(meta.topics.begin(), meta.topics.end(),
                                   [](const auto& a, const auto& b) { return a.payload_bytes < b.payload_bytes; });
  if (it == meta.topics.end()) {
    throw Error(ErrorCode::kEmptyIndex, "container has no topics");
  }
  return it->name;
}

void pace(Clock::time_point& next, double rate_hz) {
  if (rate_hz <= 0) {
    return;
  }
  std::this_thread::sleep_until(next);
  next += std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / rate_hz));
}

std::string seconds_arg(double s) { return format_seconds(static_cast<uint64_t>(std::llround(s * 1e9))); }

std::string join_topics(const std::vector<std::string>& topics) {
  std::string out;
  for (const auto& t : topics) {
    out += out.empty() ? t : " " + t;
  }
  return out;
}

int bench_offline_topic(const BenchOptions& o, Reporter& rep) {
  const auto p = prepare(o);
  const std::string topic = o.topics.empty() ? smallest_topic(p.meta) : o.topics.front();
  const std::filesystem::path bag = o.bag.empty() ? p.root.string() + ".bag" : o.bag;
  if (!std::filesystem::exists(bag)) {
    spdlog::info("exporting {} for the baseline", bag.string());
    export_container_to_bag(p.root, bag);
  }
  const std::vector<std::string> names = {topic};
  std::vector<double> ours;
  std::vector<double> base;
  uint64_t messages = 0;
  uint64_t bytes = 0;
  for (size_t i = 0; i < o.repeat; ++i) {
    const auto t0 = Clock::now();
    QueryEngine engine(p.root);
    const auto res = engine.history(names, 0, UINT64_MAX);
    ours.push_back(seconds_since(t0));
    messages = res.messages.size();
    bytes = res.payload_bytes();
  }
  uint64_t base_messages = 0;
  for (size_t i = 0; i < o.repeat; ++i) {
    const auto t0 = Clock::now();
    const auto log = IndexAtOpenLog::open(bag);
    base_messages = log.read(topic).size();
    base.push_back(seconds_since(t0));
  }
  const auto a = summarize(ours);
  const auto b = summarize(base);
  auto row = make_row("offline-topic", "container " + topic, ours, messages, bytes);
  row["baseline"] = b;
  row["ratio"] = b.mean_ms / a.mean_ms;
  row["notes"] = fmt::format("baseline {:.2f} ms, {:.1f}x", b.mean_ms, b.mean_ms / a.mean_ms);
  rep.add(row);
  auto brow = make_row("offline-topic", "index-at-open " + topic, base, base_messages, bytes);
  rep.add(brow);
  return base_messages == messages ? kExitOk : kExitFailure;
}

int bench_time_range(const BenchOptions& o, Reporter& rep) {
  const auto p = prepare(o);
  const std::string topic = o.topics.empty() ? p.meta.topics.front().name : o.topics.front();
  const std::vector<std::string> names = {topic};
  QueryEngine engine(p.root);
  const auto it = std::find_if(p.meta.topics.begin(), p.meta.topics.end(),
                               [&](const auto& t) { return t.name == topic; });
  if (it == p.meta.topics.end()) {
    throw Error(ErrorCode::kUnknownTopic, "unknown topic " + topic);
  }
  const auto& info = *it;
  const uint64_t start = info.first_timestamp;
  const uint64_t span = info.last_timestamp - start;
  const size_t points = std::max<size_t>(o.points, 1);
  for (size_t k = 1; k <= points; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(points);
    const uint64_t end = start + static_cast<uint64_t>(frac * static_cast<double>(span));
    std::vector<double> samples;
    uint64_t messages = 0;
    uint64_t bytes = 0;
    for (size_t r = 0; r < o.repeat; ++r) {
      const auto t0 = Clock::now();
      const auto res = engine.history(names, start, end);
      samples.push_back(seconds_since(t0));
      messages = res.messages.size();
      bytes = res.payload_bytes();
    }
    auto row = make_row("time-range", fmt::format("{} {:.0f}%", topic, frac * 100), samples, messages, bytes);
    row["end_fraction"] = frac;
    rep.add(row);
  }
  return kExitOk;
}

// Runs the query-* scenarios against `endpoint`, or an in-process server.
int bench_remote(const BenchOptions& o, Reporter& rep, CommandKind kind) {
  const auto p = prepare(o);
  std::unique_ptr<Server> server;
  Endpoint endpoint;
  std::mutex mu;
  std::vector<double> service;
  if (o.endpoint.empty()) {
    ServerOptions so;
    so.throttle_bytes_per_second = o.throttle;
    if (o.assume_bandwidth > 0) {
      so.assumed_bytes_per_second = o.assume_bandwidth;
    }
    server = std::make_unique<Server>(p.root, so);
    server->set_observer([&](const ServiceRecord& r) {
      std::lock_guard lock(mu);
      service.push_back(std::chrono::duration<double>(r.service_time).count());
    });
    server->start();
    endpoint = server->endpoint();
    if (kind == CommandKind::kAuto && o.assume_bandwidth <= 0) {
      // Let the sampler settle on the link before the first auto query.
      std::this_thread::sleep_for(2s);
    }
  } else {
    endpoint = Endpoint::parse(o.endpoint);
  }

  std::mt19937_64 rng(o.seed);
  const std::string topics = join_topics(p.topics);
  const uint64_t window = static_cast<uint64_t>(o.window * 1e9);
  auto next_command = [&] {
    switch (kind) {
      case CommandKind::kLatest:
        return fmt::format("q {} {}", topics, seconds_arg(o.time_len));
      case CommandKind::kHistory: {
        const uint64_t span = p.meta.end_timestamp - p.meta.start_timestamp;
        const uint64_t lo = p.meta.start_timestamp + (span > window ? rng() % (span - window) : 0);
        return fmt::format("qh {} {} {}", topics, format_seconds(lo), format_seconds(lo + window));
      }
      case CommandKind::kAuto:
        return fmt::format("qa {} {}", topics, seconds_arg(o.target));
    }
    return std::string{};
  };

  Client client(endpoint);
  std::vector<double> samples;
  uint64_t messages = 0;
  uint64_t bytes = 0;
  size_t errors = 0;
  auto next = Clock::now();
  for (size_t i = 0; i < o.requests; ++i) {
    pace(next, o.rate_hz);
    const auto cmd = next_command();
    const auto t0 = Clock::now();
    const auto frame = client.request_frame(cmd, 60s);
    samples.push_back(seconds_since(t0));
    if (frame.status == FrameStatus::kError) {
      ++errors;
      spdlog::warn("{}: {} {}", cmd, error_code_name(frame.error_code), frame.error_text);
      continue;
    }
    messages += frame.messages.size();
    for (const auto& m : frame.messages) {
      bytes += m.payload.size();
    }
  }
  if (server) {
    server->stop();
  }
  static const char* names[] = {"query-latest", "query-history", "query-auto"};
  auto row = make_row(names[static_cast<int>(kind)], topics, samples, messages, bytes);
  row["errors"] = errors;
  row["endpoint"] = endpoint.to_string();
  std::string notes = errors ? fmt::format("{} errors", errors) : "";
  if (!service.empty()) {
    const auto s = summarize(service);
    row["service"] = s;
    notes += fmt::format("{}service mean {:.3f} ms", notes.empty() ? "" : ", ", s.mean_ms);
  }
  if (kind == CommandKind::kAuto) {
    const size_t in_window = static_cast<size_t>(std::count_if(samples.begin(), samples.end(), [&](double s) {
      return s >= 0.5 * o.target && s <= 1.5 * o.target;
    }));
    row["within_target"] = static_cast<double>(in_window) / static_cast<double>(samples.size());
    notes += fmt::format(", {}/{} within +-50% of target", in_window, samples.size());
  }
  row["notes"] = notes;
  rep.add(row);
  return errors == 0 ? kExitOk : kExitFailure;
}

int bench_concurrent(const BenchOptions& o, Reporter& rep) {
  const auto p = prepare(o);
  std::unique_ptr<Server> server;
  Endpoint endpoint;
  if (o.endpoint.empty()) {
    ServerOptions so;
    so.throttle_bytes_per_second = o.throttle;
    server = std::make_unique<Server>(p.root, so);
    server->start();
    endpoint = server->endpoint();
  } else {
    endpoint = Endpoint::parse(o.endpoint);
  }
  const std::string cmd = fmt::format("q {} {}", join_topics(p.topics), seconds_arg(o.time_len));
  int rc = kExitOk;
  for (size_t k : o.clients) {
    std::mutex mu;
    std::vector<double> samples;
    std::atomic<uint64_t> received{0};
    std::atomic<uint64_t> messages{0};
    std::atomic<uint64_t> bytes{0};
    std::vector<std::thread> workers;
    for (size_t c = 0; c < k; ++c) {
      workers.emplace_back([&, c] {
        try {
          Client client(endpoint);
          auto next = Clock::now();
          if (o.rate_hz > 0) {
            next += std::chrono::duration_cast<Clock::duration>(
                std::chrono::duration<double>(static_cast<double>(c) / (o.rate_hz * static_cast<double>(k))));
          }
          for (size_t i = 0; i < o.requests; ++i) {
            pace(next, o.rate_hz);
            const auto t0 = Clock::now();
            const auto reply = client.request(cmd, 60s);
            const double lat = seconds_since(t0);
            ++received;
            messages += reply.size();
            uint64_t b = 0;
            for (const auto& m : reply) {
              b += m.payload.size();
            }
            bytes += b;
            std::lock_guard lock(mu);
            samples.push_back(lat);
          }
        } catch (const Error& e) {
          spdlog::warn("client {}: {}", c, e.what());
        }
      });
    }
    for (auto& w : workers) {
      w.join();
    }
    const uint64_t expected = k * o.requests;
    auto row = make_row("concurrent", fmt::format("K={}", k), samples, messages, bytes);
    row["clients"] = k;
    row["reception_rate"] = static_cast<double>(received) / static_cast<double>(expected);
    row["notes"] = fmt::format("reception {}/{}", received.load(), expected);
    rep.add(row);
    if (received != expected) {
      rc = kExitFailure;
    }
  }
  if (server) {
    server->stop();
  }
  return rc;
}

}  // namespace

std::vector<std::string> bench_scenarios() {
  return {"offline-topic", "time-range", "query-latest", "query-history", "query-auto", "concurrent"};
}

int run_bench(const BenchOptions& o) {
  Reporter rep(o);
  int rc = kExitOk;
  if (o.scenario == "offline-topic") {
    rc = bench_offline_topic(o, rep);
  } else if (o.scenario == "time-range") {
    rc = bench_time_range(o, rep);
  } else if (o.scenario == "query-latest") {
    rc = bench_remote(o, rep, CommandKind::kLatest);
  } else if (o.scenario == "query-history") {
    rc = bench_remote(o, rep, CommandKind::kHistory);
  } else if (o.scenario == "query-auto") {
    rc = bench_remote(o, rep, CommandKind::kAuto);
  } else if (o.scenario == "concurrent") {
    rc = bench_concurrent(o, rep);
  } else {
    throw Error(ErrorCode::kBadParam, "unknown scenario " + o.scenario);
  }
  rep.table();
  return rc;
}

}  // namespace brickstore::cli
