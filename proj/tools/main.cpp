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

// brickstore command line tool.

#include <signal.h>

#include <fstream>
#include <map>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "bench.hpp"
#include "brickstore/bag.hpp"
#include "brickstore/error.hpp"
#include "brickstore/net.hpp"
#include "brickstore/protocol.hpp"
#include "brickstore/query.hpp"
#include "brickstore/recorder.hpp"
#include "brickstore/synth.hpp"
#include "common.hpp"

namespace brickstore::cli {
namespace {

using namespace std::chrono_literals;
using nlohmann::json;

struct GlobalOptions {
  bool json = false;
  std::string log_level = "warn";
};

struct WorkloadArgs {
  std::string file;
  std::string preset;
  double duration = 10.0;
  uint64_t seed = 1;

  void add(CLI::App* cmd) {
    cmd->add_option("workload", file, "Workload spec file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset, "Named workload preset")
        ->check(CLI::IsMember(workload_preset_names()));
    cmd->add_option("--duration", duration, "Preset duration in seconds")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Preset seed");
  }
};

void print_record_summary(const GlobalOptions& g, const ContainerMetadata& meta, const RecorderStats& stats,
                          double secs) {
  if (g.json) {
    auto j = metadata_json(meta);
    j["elapsed_s"] = secs;
    j["dropped"] = stats.dropped;
    j["flushes"] = stats.flushes;
    std::cout << j.dump() << "\n";
    return;
  }
  print_metadata_table(meta);
  fmt::print("\nwrote {} messages ({}) in {:.2f} s, {} dropped, {} index flushes\n", stats.messages_written,
             format_bytes(stats.bytes_written), secs, stats.dropped, stats.flushes);
}

struct RecordArgs {
  WorkloadArgs workload;
  std::string from_bag;
  std::string out;
  bool realtime = false;
  double speed = 1.0;
  std::string durability = "range";
  bool clamp = false;
};

RecorderOptions recorder_options(const RecordArgs& a) {
  RecorderOptions opts;
  opts.durability = parse_durability(a.durability);
  opts.realtime = a.realtime;
  opts.realtime_speed = a.speed;
  opts.out_of_order = a.clamp ? OutOfOrderPolicy::kClamp : OutOfOrderPolicy::kReject;
  return opts;
}

int cmd_record(const GlobalOptions& g, const RecordArgs& a) {
  const auto opts = recorder_options(a);
  RecorderStats stats;
  const auto t0 = Clock::now();
  ContainerMetadata meta;
  if (!a.from_bag.empty()) {
    meta = convert_bag_to_container(a.from_bag, a.out, opts, &stats);
  } else {
    SynthSource src(resolve_workload(a.workload.file, a.workload.preset, a.workload.duration, a.workload.seed));
    meta = record(src, a.out, opts, &stats);
  }
  print_record_summary(g, meta, stats, seconds_since(t0));
  return kExitOk;
}

int cmd_make_bag(const GlobalOptions& g, const WorkloadArgs& w, const std::string& out, size_t chunk) {
  const auto workload = resolve_workload(w.file, w.preset, w.duration, w.seed);
  BagWriter writer(out, BagWriterOptions{chunk});
  for (const auto& t : workload.topics) {
    writer.add_connection(t.name, t.type);
  }
  SynthSource src(workload);
  uint64_t n = 0;
  uint64_t bytes = 0;
  while (auto m = src.next()) {
    writer.write(decode_synth_trailer(m->payload)->topic_index, m->timestamp, m->payload);
    ++n;
    bytes += m->payload.size();
  }
  writer.close();
  if (g.json) {
    std::cout << json{{"bag", out}, {"messages", n}, {"bytes", bytes}}.dump() << "\n";
  } else {
    fmt::print("wrote {} messages ({}) to {}\n", n, format_bytes(bytes), out);
  }
  return kExitOk;
}

struct ServeArgs {
  std::string container;
  std::string bind = "127.0.0.1:7070";
  double throttle = 0;
  double assume_bandwidth = 0;
  int sample_ms = 100;
};

int cmd_serve(const ServeArgs& a) {
  ServerOptions opts;
  opts.bind = Endpoint::parse(a.bind);
  opts.throttle_bytes_per_second = a.throttle;
  opts.bandwidth_sample_period = std::chrono::milliseconds(a.sample_ms);
  if (a.assume_bandwidth > 0) {
    opts.assumed_bytes_per_second = a.assume_bandwidth;
  }
  // Block termination signals before any thread starts so sigwait owns them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  Server server(a.container, opts);
  server.set_observer([](const ServiceRecord& r) {
    spdlog::info("\"{}\" -> {} msgs, {} bytes, service {:.3f} ms, send {:.3f} ms{}", r.command, r.messages,
                 r.payload_bytes, std::chrono::duration<double, std::milli>(r.service_time).count(),
                 std::chrono::duration<double, std::milli>(r.send_time).count(),
                 r.code == ErrorCode::kOk ? "" : fmt::format(" [{}]", error_code_name(r.code)));
  });
  server.start();
  // Scripts parse this line to find an ephemeral port.
  fmt::print("listening on {}\n", server.endpoint().to_string());
  std::fflush(stdout);
  int sig = 0;
  sigwait(&set, &sig);
  spdlog::info("signal {}, shutting down", sig);
  server.stop();
  const auto s = server.stats();
  fmt::print("served {} requests on {} connections, {} errors\n", s.requests, s.connections, s.errors);
  return kExitOk;
}

struct QueryArgs {
  std::string endpoint;
  std::string container;
  std::string command;
  std::string script;
  std::string dump;
  double rate_hz = 1.0;
  double bandwidth = 0;
  double timeout = 30.0;
};

std::string sanitize(std::string_view topic) {
  std::string out;
  for (char c : topic) {
    out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
  }
  return out;
}

void dump_messages(const std::filesystem::path& dir, const std::vector<Message>& messages) {
  for (const auto& m : messages) {
    const auto sub = dir / sanitize(m.topic);
    std::filesystem::create_directories(sub);
    std::ofstream f(sub / fmt::format("{}.bin", m.timestamp), std::ios::binary);
    f.write(reinterpret_cast<const char*>(m.payload.data()), static_cast<std::streamsize>(m.payload.size()));
    if (!f) {
      throw Error(ErrorCode::kIoError, "cannot write dump under " + sub.string());
    }
  }
}

class QueryRunner {
 public:
  explicit QueryRunner(const QueryArgs& a) : args_(a) {
    if (!a.container.empty()) {
      engine_ = std::make_unique<QueryEngine>(a.container);
    } else {
      std::string ep = a.endpoint;
      if (ep.empty()) {
        const char* env = std::getenv("BRICKSTORE_ENDPOINT");
        ep = env ? env : "";
      }
      if (ep.empty()) {
        throw Error(ErrorCode::kBadParam, "need --endpoint, --container or BRICKSTORE_ENDPOINT");
      }
      client_ = std::make_unique<Client>(Endpoint::parse(ep));
    }
  }

  // Returns the messages, or throws the reply's error.
  std::vector<Message> run(const std::string& line) {
    const auto timeout = std::chrono::milliseconds(static_cast<int64_t>(args_.timeout * 1e3));
    if (client_) {
      return client_->request(line, timeout);
    }
    const auto cmd = parse_command(line);
    switch (cmd.kind) {
      case CommandKind::kLatest:
        return engine_->latest(cmd.topics, cmd.time_len_ns).messages;
      case CommandKind::kHistory:
        return engine_->history(cmd.topics, cmd.start_ns, cmd.end_ns).messages;
      case CommandKind::kAuto: {
        // No link to measure locally; the caller states one.
        BandwidthMonitor monitor;
        if (args_.bandwidth > 0) {
          monitor.record(static_cast<uint64_t>(args_.bandwidth), std::chrono::seconds(1));
        }
        return engine_->automatic(cmd.topics, static_cast<double>(cmd.target_ns) / 1e9, monitor.estimate())
            .messages;
      }
    }
    return {};
  }

 private:
  const QueryArgs& args_;
  std::unique_ptr<QueryEngine> engine_;
  std::unique_ptr<Client> client_;
};

void print_query_result(const GlobalOptions& g, const std::string& line, const std::vector<Message>& messages,
                        double secs) {
  std::map<std::string, std::pair<uint64_t, uint64_t>> per_topic;
  uint64_t bytes = 0;
  for (const auto& m : messages) {
    auto& e = per_topic[m.topic];
    ++e.first;
    e.second += m.payload.size();
    bytes += m.payload.size();
  }
  if (g.json) {
    json topics = json::object();
    for (const auto& [name, e] : per_topic) {
      topics[name] = {{"messages", e.first}, {"bytes", e.second}};
    }
    std::cout << json{{"command", line},
                      {"messages", messages.size()},
                      {"bytes", bytes},
                      {"latency_ms", secs * 1e3},
                      {"topics", topics}}
                     .dump()
              << "\n";
    return;
  }
  fmt::print("{}: {} messages, {} in {:.3f} ms\n", line, messages.size(), format_bytes(bytes), secs * 1e3);
  for (const auto& [name, e] : per_topic) {
    fmt::print("  {:<36} {:>8} {:>12}\n", name, e.first, format_bytes(e.second));
  }
}

int cmd_query(const GlobalOptions& g, const QueryArgs& a) {
  if (a.command.empty() == a.script.empty()) {
    throw Error(ErrorCode::kBadParam, "give a command or --script, not both");
  }
  QueryRunner runner(a);
  std::vector<std::string> lines;
  if (!a.script.empty()) {
    std::ifstream in(a.script);
    if (!in) {
      throw Error(ErrorCode::kIoError, "cannot read script " + a.script);
    }
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.front() != '#') {
        lines.push_back(line);
      }
    }
  } else {
    lines.push_back(a.command);
  }
  int rc = kExitOk;
  auto next = Clock::now();
  for (const auto& line : lines) {
    std::this_thread::sleep_until(next);
    if (a.rate_hz > 0) {
      next += std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / a.rate_hz));
    }
    const auto t0 = Clock::now();
    try {
      const auto messages = runner.run(line);
      print_query_result(g, line, messages, seconds_since(t0));
      if (!a.dump.empty()) {
        dump_messages(a.dump, messages);
      }
    } catch (const Error& e) {
      if (lines.size() == 1) {
        throw;
      }
      // Keep going through a script; report the first failure.
      spdlog::error("{}: {} ({})", line, e.what(), error_code_name(e.code()));
      if (rc == kExitOk) {
        rc = kExitErrorBase + static_cast<int>(e.code());
      }
    }
  }
  return rc;
}

int cmd_info(const GlobalOptions& g, const std::string& root, bool verify) {
  const auto meta = read_metadata(root);
  if (verify) {
    verify_container(root);
  }
  if (g.json) {
    auto j = metadata_json(meta);
    if (verify) {
      j["verified"] = true;
    }
    std::cout << j.dump() << "\n";
  } else {
    print_metadata_table(meta);
    if (verify) {
      fmt::print("\nverified: bricks, index and metadata agree\n");
    }
  }
  return kExitOk;
}

int cmd_recover(const GlobalOptions& g, const std::string& root) {
  const auto report = recover_container(root);
  verify_container(root);
  if (g.json) {
    auto j = metadata_json(report.metadata);
    j["brick_bytes_truncated"] = report.brick_bytes_truncated;
    j["orphan_bricks_removed"] = report.orphan_bricks_removed;
    std::cout << j.dump() << "\n";
  } else {
    fmt::print("recovered {}: {} messages, {} brick bytes truncated, {} orphan bricks removed\n", root,
               report.metadata.message_count(), report.brick_bytes_truncated,
               report.orphan_bricks_removed.size());
  }
  return kExitOk;
}

}  // namespace
}  // namespace brickstore::cli

int main(int argc, char** argv) {
  using namespace brickstore;
  using namespace brickstore::cli;

  CLI::App app{"brickstore: per-topic message containers with a time index"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_flag("--json", g.json, "Machine-readable output (JSON lines)");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  RecordArgs rec;
  auto* record_cmd = app.add_subcommand("record", "Record a workload or a bag into a new container");
  rec.workload.add(record_cmd);
  record_cmd->add_option("--from-bag", rec.from_bag, "Ingest this bag instead of a workload")
      ->check(CLI::ExistingFile);
  record_cmd->add_option("--out", rec.out, "Container directory to create")->required();
  record_cmd->add_flag("--realtime", rec.realtime, "Pace by message timestamps");
  record_cmd->add_option("--speed", rec.speed, "Realtime speed factor")->check(CLI::PositiveNumber);
  record_cmd->add_option("--durability", rec.durability, "buffered, range or paranoid")
      ->check(CLI::IsMember({"buffered", "range", "paranoid"}));
  record_cmd->add_flag("--clamp", rec.clamp, "Clamp regressing timestamps instead of dropping");

  RecordArgs ing;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert a bag into a new container");
  ingest_cmd->add_option("bag", ing.from_bag, "Input bag")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--out", ing.out, "Container directory to create")->required();
  ingest_cmd->add_option("--durability", ing.durability, "buffered, range or paranoid")
      ->check(CLI::IsMember({"buffered", "range", "paranoid"}));
  ingest_cmd->add_flag("--clamp", ing.clamp, "Clamp regressing timestamps instead of dropping");

  WorkloadArgs bag_workload;
  std::string bag_out;
  size_t bag_chunk = 768 * 1024;
  auto* bag_cmd = app.add_subcommand("make-bag", "Write a workload as a bag file");
  bag_workload.add(bag_cmd);
  bag_cmd->add_option("--out", bag_out, "Bag file to write")->required();
  bag_cmd->add_option("--chunk", bag_chunk, "Chunk threshold in bytes")->check(CLI::PositiveNumber);

  ServeArgs srv;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a container over TCP");
  serve_cmd->add_option("--container", srv.container, "Container directory")->required();
  serve_cmd->add_option("--bind", srv.bind, "host:port (port 0 picks one)");
  serve_cmd->add_option("--throttle", srv.throttle, "Cap outbound bytes/s (0 = none)");
  serve_cmd->add_option("--assume-bandwidth", srv.assume_bandwidth, "Seed the bandwidth estimate, bytes/s");
  serve_cmd->add_option("--sample-ms", srv.sample_ms, "Bandwidth sampling period")->check(CLI::PositiveNumber);

  QueryArgs qry;
  auto* query_cmd = app.add_subcommand("query", "Run q / qh / qa commands");
  query_cmd->add_option("command", qry.command, "Command, e.g. \"q /imu 1\"");
  auto* ep_opt = query_cmd->add_option("--endpoint", qry.endpoint, "Server host:port (or BRICKSTORE_ENDPOINT)");
  query_cmd->add_option("--container", qry.container, "Query a local container instead")->excludes(ep_opt);
  query_cmd->add_option("--script", qry.script, "File with one command per line")->check(CLI::ExistingFile);
  query_cmd->add_option("--rate", qry.rate_hz, "Script send rate in Hz (0 = back to back)");
  query_cmd->add_option("--dump", qry.dump, "Write payloads under this directory");
  query_cmd->add_option("--bandwidth", qry.bandwidth, "Local qa: link bytes/s to size replies for");
  query_cmd->add_option("--timeout", qry.timeout, "Per-request timeout in seconds")->check(CLI::PositiveNumber);

  std::string info_root;
  bool info_verify = false;
  auto* info_cmd = app.add_subcommand("info", "Print container metadata");
  info_cmd->add_option("container", info_root, "Container directory")->required();
  info_cmd->add_flag("--verify", info_verify, "Check bricks, index and metadata");

  std::string recover_root;
  auto* recover_cmd = app.add_subcommand("recover", "Repair a container after a crash");
  recover_cmd->add_option("container", recover_root, "Container directory")->required();

  BenchOptions bench;
  std::string bench_clients = "1,2,4,8,16";
  std::string bench_topics;
  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark scenario");
  bench_cmd->add_option("scenario", bench.scenario, "Scenario")->required()->check(CLI::IsMember(bench_scenarios()));
  bench_cmd->add_option("--container", bench.container, "Container (generated when absent)")->required();
  bench_cmd->add_option("--workload", bench.workload_file, "Workload file for generation")
      ->check(CLI::ExistingFile);
  bench_cmd->add_option("--preset", bench.preset, "Preset for generation")
      ->check(CLI::IsMember(workload_preset_names()));
  bench_cmd->add_option("--duration", bench.duration, "Preset duration, seconds")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench.seed, "Generation and query seed");
  bench_cmd->add_option("--bag", bench.bag, "Baseline bag for offline-topic");
  bench_cmd->add_option("--endpoint", bench.endpoint, "Use a running server");
  bench_cmd->add_option("--topics", bench_topics, "Comma-separated topics (default all)");
  bench_cmd->add_option("--requests", bench.requests, "Requests per client");
  bench_cmd->add_option("--rate", bench.rate_hz, "Requests per second per client (0 = back to back)");
  bench_cmd->add_option("--throttle", bench.throttle, "In-process server link cap, bytes/s");
  bench_cmd->add_option("--assume-bandwidth", bench.assume_bandwidth, "Seed the server estimate, bytes/s");
  bench_cmd->add_option("--time-len", bench.time_len, "Latest window, seconds")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--window", bench.window, "History window, seconds")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--target", bench.target, "Auto response time, seconds")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--points", bench.points, "time-range points")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--repeat", bench.repeat, "Repetitions per point")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--clients", bench_clients, "Client counts for concurrent");
  bench_cmd->add_option("--report", bench.report, "Append JSON lines to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("brickstore"));
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (*record_cmd) {
      if (rec.from_bag.empty() && rec.workload.file.empty() && rec.workload.preset.empty()) {
        throw Error(ErrorCode::kBadParam, "give a workload file, --preset or --from-bag");
      }
      return cmd_record(g, rec);
    }
    if (*ingest_cmd) {
      return cmd_record(g, ing);
    }
    if (*bag_cmd) {
      if (bag_workload.file.empty() && bag_workload.preset.empty()) {
        throw Error(ErrorCode::kBadParam, "give a workload file or --preset");
      }
      return cmd_make_bag(g, bag_workload, bag_out, bag_chunk);
    }
    if (*serve_cmd) {
      return cmd_serve(srv);
    }
    if (*query_cmd) {
      return cmd_query(g, qry);
    }
    if (*info_cmd) {
      return cmd_info(g, info_root, info_verify);
    }
    if (*recover_cmd) {
      return cmd_recover(g, recover_root);
    }
    if (*bench_cmd) {
      bench.json = g.json;
      bench.topics = split_list(bench_topics);
      bench.clients.clear();
      for (const auto& k : split_list(bench_clients)) {
        bench.clients.push_back(std::stoul(k));
      }
      return run_bench(bench);
    }
  } catch (const Error& e) {
    if (g.json) {
      std::cout << json{{"error", std::string(error_code_name(e.code()))},
                        {"code", static_cast<int>(e.code())},
                        {"message", e.what()}}
                       .dump()
                << "\n";
    }
    spdlog::error("{} ({})", e.what(), error_code_name(e.code()));
    return kExitErrorBase + static_cast<int>(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
