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

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "atomtable/errors.hpp"
#include "atomtable/workload.hpp"

namespace bench = atomtable::bench;

int main(int argc, char** argv) {
  CLI::App app{
      "atomtable-bench: multi-thread substring interning benchmark.\n"
      "Emits one CSV row per repetition (stdout, or --out FILE)."};

  bench::BenchConfig cfg;
  std::string mode = "preallocated";
  app.add_option("--threads", cfg.threads, "Worker thread count")
      ->capture_default_str();
  app.add_option("--alphabet", cfg.alphabet,
                 "Distinct symbols in the subject string (N); the workload "
                 "interns all N(N+1)/2+1 substrings")
      ->capture_default_str();
  app.add_option("--mode", mode,
                 "preallocated | agc_active | churn | stall_probe")
      ->capture_default_str();
  app.add_option("--reps", cfg.reps, "Repetitions (one CSV row each)")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Workload shuffle seed")
      ->capture_default_str();
  app.add_option("--out", cfg.out, "CSV output path (default: stdout)");

  try {
    app.parse(argc, argv);
    cfg.mode = bench::parse_mode(mode);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  } catch (const atomtable::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  }

  try {
    const auto rows = bench::run_bench(cfg);
    if (cfg.out.empty()) {
      bench::emit_csv(rows, std::cout);
    } else {
      bench::emit_csv(rows, cfg.out);
      std::cerr << "wrote " << rows.size() << " rows to " << cfg.out << '\n';
    }
  } catch (const atomtable::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
