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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace atomtable::bench {

enum class Mode {
  preallocated,  // intern once up front, threads only look up
  agc_active,    // threads intern and drop, collector triggered by churn
  churn,         // mixed intern/drop/arena stress with a collector loop
  stall_probe,   // measure lookup latency while the destroy phase stalls
};

struct BenchConfig {
  unsigned threads = 1;
  std::size_t alphabet = 1000;  // distinct symbols in the subject string
  Mode mode = Mode::preallocated;
  unsigned reps = 3;
  std::uint64_t seed = 42;
  std::string out;  // CSV path; empty writes CSV to stdout
};

struct BenchRow {
  unsigned row = 0;
  unsigned threads = 0;
  double process_s = 0.0;
  double wall_s = 0.0;
  std::uint64_t agc_invocations = 0;
  std::uint64_t reclaimed_bytes = 0;
  double agc_s = 0.0;
};

/// Unique strings produced by substring_workload(n): all contiguous
/// substrings of an n-symbol subject plus the empty string.
constexpr std::size_t expected_unique(std::size_t n) {
  return n * (n + 1) / 2 + 1;
}

/// All contiguous substrings (empty string and full string included) of a
/// subject built from `n` distinct symbols. The emitted order is shuffled
/// deterministically by `seed`; the string set depends only on `n`.
std::vector<std::string> substring_workload(std::size_t n, std::uint64_t seed);

Mode parse_mode(const std::string& name);  // throws ConfigError
const char* mode_name(Mode mode);

/// Run the configured benchmark and return one row per repetition.
/// Throws ConfigError for invalid configurations and AtomError if a
/// library invariant is violated (the post-run audit failed).
std::vector<BenchRow> run_bench(const BenchConfig& cfg);

/// Write rows as CSV: header
/// `row,threads,process_s,wall_s,agc_invocations,reclaimed_bytes,agc_s`,
/// dot decimal separator, no thousands separators.
void emit_csv(const std::vector<BenchRow>& rows, std::ostream& out);
void emit_csv(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace atomtable::bench
