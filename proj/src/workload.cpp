/*
 * Copyright 2026 the atomtable authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "atomtable/workload.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <ostream>
#include <random>
#include <thread>
#include <unordered_set>

#include "atomtable/table.hpp"

namespace atomtable::bench {

namespace {

double process_cpu_seconds() {
  return static_cast<double>(std::clock()) / CLOCKS_PER_SEC;
}

double wall_seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void run_workers(unsigned n, const std::function<void(unsigned)>& body) {
  std::vector<std::thread> workers;
  workers.reserve(n);
  std::mutex err_lock;
  std::exception_ptr err;
  for (unsigned t = 0; t < n; ++t) {
    workers.emplace_back([&, t] {
      try {
        body(t);
      } catch (...) {
        std::lock_guard<std::mutex> g(err_lock);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (err) std::rethrow_exception(err);
}

AgcStats stats_delta(const AgcStats& before, const AgcStats& after) {
  AgcStats d;
  d.invocations = after.invocations - before.invocations;
  d.atoms_reclaimed = after.atoms_reclaimed - before.atoms_reclaimed;
  d.bytes_reclaimed = after.bytes_reclaimed - before.bytes_reclaimed;
  d.mark_seconds = after.mark_seconds - before.mark_seconds;
  d.collect_seconds = after.collect_seconds - before.collect_seconds;
  return d;
}

/// Distinct symbol encodings: single letters for small alphabets, raw
/// two-byte codes otherwise.
std::string symbol_for(std::size_t i, std::size_t n) {
  if (n <= 26) {
    return std::string(1, static_cast<char>('a' + i));
  }
  std::string s(2, '\0');
  s[0] = static_cast<char>((i >> 8) & 0xff);
  s[1] = static_cast<char>(i & 0xff);
  return s;
}

void audit_uniqueness(AtomTable& table) {
  std::unordered_set<std::string> seen;
  bool duplicate = false;
  table.for_each_valid_atom([&](AtomHandle, std::string_view name) {
    if (!seen.emplace(name).second) duplicate = true;
  });
  if (duplicate) {
    throw AtomError("post-run audit found duplicate valid atoms");
  }
  if (seen.size() != table.valid_atom_count()) {
    throw AtomError("post-run audit found unreachable valid atoms");
  }
}

struct RepTimer {
  double cpu0 = process_cpu_seconds();
  std::chrono::steady_clock::time_point wall0 =
      std::chrono::steady_clock::now();
  AgcStats stats0;
};

BenchRow finish_row(const RepTimer& t, const AtomTable& table, unsigned row,
                    unsigned threads) {
  BenchRow r;
  r.row = row;
  r.threads = threads;
  r.process_s = process_cpu_seconds() - t.cpu0;
  r.wall_s = wall_seconds_since(t.wall0);
  const AgcStats d = stats_delta(t.stats0, table.stats());
  r.agc_invocations = d.invocations;
  r.reclaimed_bytes = d.bytes_reclaimed;
  r.agc_s = d.mark_seconds + d.collect_seconds;
  return r;
}

std::vector<BenchRow> run_preallocated(const BenchConfig& cfg,
                                       const std::vector<std::string>& work) {
  AtomTable table;
  ThreadContext& main_ctx = table.register_thread();
  std::vector<AtomHandle> held;
  held.reserve(work.size());
  for (const auto& s : work) {
    held.push_back(table.intern(s, main_ctx));
  }

  std::vector<BenchRow> rows;
  for (unsigned rep = 0; rep < cfg.reps; ++rep) {
    RepTimer timer;
    timer.stats0 = table.stats();
    run_workers(cfg.threads, [&](unsigned) {
      ThreadContext& ctx = table.register_thread();
      for (const auto& s : work) {
        auto h = table.find_existing(s, ctx);
        if (!h) throw AtomError("preallocated atom missing");
        table.unregister_atom(*h, ctx);
      }
      table.deregister_thread(ctx);
    });
    rows.push_back(finish_row(timer, table, rep + 1, cfg.threads));
  }

  if (table.valid_atom_count() != expected_unique(cfg.alphabet)) {
    throw AtomError("unique atom count does not match the workload formula");
  }
  audit_uniqueness(table);
  for (AtomHandle h : held) table.unregister_atom(h, main_ctx);
  table.deregister_thread(main_ctx);
  return rows;
}

std::vector<BenchRow> run_agc_active(const BenchConfig& cfg,
                                     const std::vector<std::string>& work) {
  Config tc;
  tc.auto_gc = true;
  AtomTable table(tc);
  std::vector<BenchRow> rows;
  for (unsigned rep = 0; rep < cfg.reps; ++rep) {
    RepTimer timer;
    timer.stats0 = table.stats();
    run_workers(cfg.threads, [&](unsigned) {
      ThreadContext& ctx = table.register_thread();
      for (const auto& s : work) {
        AtomHandle h = table.intern(s, ctx);
        table.unregister_atom(h, ctx);
      }
      table.deregister_thread(ctx);
    });
    rows.push_back(finish_row(timer, table, rep + 1, cfg.threads));
  }
  audit_uniqueness(table);
  return rows;
}

std::vector<BenchRow> run_churn(const BenchConfig& cfg,
                                const std::vector<std::string>& work) {
  AtomTable table;
  std::vector<BenchRow> rows;
  for (unsigned rep = 0; rep < cfg.reps; ++rep) {
    RepTimer timer;
    timer.stats0 = table.stats();
    std::atomic<bool> done{false};
    std::thread collector([&] {
      while (!done.load(std::memory_order_acquire)) {
        table.run_agc();
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
      }
    });
    run_workers(cfg.threads, [&](unsigned t) {
      std::mt19937_64 rng(cfg.seed + rep * 1315423911u + t);
      ThreadContext& ctx = table.register_thread();
      ScanArena& arena = ctx.create_arena();
      std::size_t held = 0;
      for (const auto& s : work) {
        AtomHandle h = table.intern(s, ctx);
        if (rng() % 10 == 0) {
          arena.push(h.raw);
          ++held;
        }
        table.unregister_atom(h, ctx);
        if (held > 64) {
          while (held > 0) {
            arena.pop();
            --held;
          }
        }
      }
      while (arena.size() > 0) arena.pop();
      table.deregister_thread(ctx);
    });
    done.store(true, std::memory_order_release);
    collector.join();
    rows.push_back(finish_row(timer, table, rep + 1, cfg.threads));
  }
  audit_uniqueness(table);
  return rows;
}

std::vector<BenchRow> run_stall_probe(const BenchConfig& cfg,
                                      const std::vector<std::string>& work) {
  Config tc;
  tc.initial_buckets = 4096;  // keep the probe interns clear of any resize
  AtomTable table(tc);
  ThreadContext& ctx = table.register_thread();
  const std::size_t probe_count = std::min<std::size_t>(work.size(), 256);

  auto probe_once = [&](const std::string& fresh) {
    const auto t0 = std::chrono::steady_clock::now();
    AtomHandle h = table.intern(fresh, ctx);
    const double d = wall_seconds_since(t0);
    table.unregister_atom(h, ctx);
    return d;
  };

  // Baseline latency with an idle collector.
  double idle = 0;
  for (std::size_t i = 0; i < probe_count; ++i) {
    idle = std::max(idle, probe_once(work[i % work.size()]));
  }

  // Stall the destroy phase and probe from a second registered thread.
  TestHooks hooks;
  hooks.before_destroy = [] {
    std::this_thread::sleep_for(std::chrono::milliseconds(500));
  };
  table.set_test_hooks(hooks);

  std::vector<BenchRow> rows;
  for (unsigned rep = 0; rep < cfg.reps; ++rep) {
    RepTimer timer;
    timer.stats0 = table.stats();
    double stalled = 0;
    std::thread collector([&] { table.run_agc(); });
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    std::thread prober([&] {
      ThreadContext& pctx = table.register_thread();
      for (std::size_t i = 0; i < probe_count; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        AtomHandle h = table.intern("stall-probe-" + std::to_string(rep) +
                                        "-" + std::to_string(i),
                                    pctx);
        stalled = std::max(stalled, wall_seconds_since(t0));
        table.unregister_atom(h, pctx);
      }
      table.deregister_thread(pctx);
    });
    prober.join();
    collector.join();
    rows.push_back(finish_row(timer, table, rep + 1, cfg.threads));
    const double bound = std::max(idle * 10.0, 0.010);
    if (stalled > bound) {
      throw AtomError("lookup latency exceeded bound during stalled destroy");
    }
  }
  table.set_test_hooks({});
  table.deregister_thread(ctx);
  return rows;
}

}  // namespace

std::vector<std::string> substring_workload(std::size_t n,
                                            std::uint64_t seed) {
  if (n < 1) {
    throw ConfigError("alphabet size must be at least 1");
  }
  if (n > 0xffff) {
    throw ConfigError("alphabet size exceeds the symbol encoding");
  }
  std::string subject;
  std::vector<std::size_t> symbol_starts;
  symbol_starts.reserve(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    symbol_starts.push_back(subject.size());
    subject += symbol_for(i, n);
  }
  symbol_starts.push_back(subject.size());

  std::vector<std::string> out;
  out.reserve(expected_unique(n));
  out.emplace_back();  // the empty string
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t len = 1; i + len <= n; ++len) {
      out.push_back(subject.substr(symbol_starts[i],
                                   symbol_starts[i + len] - symbol_starts[i]));
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin() + 1, out.end(), rng);
  return out;
}

Mode parse_mode(const std::string& name) {
  if (name == "preallocated") return Mode::preallocated;
  if (name == "agc_active") return Mode::agc_active;
  if (name == "churn") return Mode::churn;
  if (name == "stall_probe") return Mode::stall_probe;
  throw ConfigError("unknown mode: " + name);
}

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::preallocated:
      return "preallocated";
    case Mode::agc_active:
      return "agc_active";
    case Mode::churn:
      return "churn";
    case Mode::stall_probe:
      return "stall_probe";
  }
  return "?";
}

std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  if (cfg.threads < 1) {
    throw ConfigError("thread count must be at least 1");
  }
  if (cfg.reps < 1) {
    throw ConfigError("repetition count must be at least 1");
  }
  const auto work = substring_workload(cfg.alphabet, cfg.seed);
  switch (cfg.mode) {
    case Mode::preallocated:
      return run_preallocated(cfg, work);
    case Mode::agc_active:
      return run_agc_active(cfg, work);
    case Mode::churn:
      return run_churn(cfg, work);
    case Mode::stall_probe:
      return run_stall_probe(cfg, work);
  }
  throw ConfigError("unknown mode");
}

void emit_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
  if (rows.empty()) {
    throw ContractViolation("no rows to emit");
  }
  out << "row,threads,process_s,wall_s,agc_invocations,reclaimed_bytes,agc_s"
      << '\n';
  char line[256];
  for (const BenchRow& r : rows) {
    std::snprintf(line, sizeof(line), "%u,%u,%.6f,%.6f,%llu,%llu,%.6f", r.row,
                  r.threads, r.process_s, r.wall_s,
                  static_cast<unsigned long long>(r.agc_invocations),
                  static_cast<unsigned long long>(r.reclaimed_bytes), r.agc_s);
    out << line << '\n';
  }
  if (!out) {
    throw AtomError("failed to write CSV output");
  }
}

void emit_csv(const std::vector<BenchRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw AtomError("cannot open CSV output path: " + path);
  }
  emit_csv(rows, f);
}

}  // namespace atomtable::bench
