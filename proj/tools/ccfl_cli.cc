/*
 * Copyright 2026 The ccfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line driver for the simulator.
//
//   ccfl run          --config exp.cfg --method cc_fedavg --seeds 5
//   ccfl grid-rw      --config exp.cfg --r 0,0.5,1 --W 1,2,4,8,16
//   ccfl efficiency   --config exp.cfg --W 4
//   ccfl probe-lemma2 --task quadratic --resamples 500
//
// Exit codes: 0 ok, 1 internal, 2 config, 3 divergence, 4 I/O.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "ccfl/config.h"
#include "ccfl/diagnostics.h"
#include "ccfl/errors.h"
#include "ccfl/experiment.h"

namespace {

using ccfl::ExperimentConfig;

struct CommonFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> sets;
};

// Registers a flag that, when given, overrides config key `key`.
void add_override(CLI::App* app, CommonFlags& flags, const std::string& name,
                  const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      name,
      [&flags, key](const std::string& v) { flags.overrides.emplace_back(key, v); },
      help);
}

void add_common(CLI::App* app, CommonFlags& f, bool with_sweep_flags) {
  app->add_option("--config", f.config_path, "flat key = value config file");
  add_override(app, f, "--seed", "seed", "base seed");
  add_override(app, f, "--seeds", "seeds", "number of consecutive seeds");
  add_override(app, f, "--out", "out", "output CSV path");
  add_override(app, f, "--task", "task",
               "quadratic | synthetic-logistic | synthetic-mlp | idx-mlp");
  add_override(app, f, "--beta", "beta", "budget levels p_i = (1/2)^floor(beta i / N)");
  add_override(app, f, "--p-list", "p_list", "explicit comma-separated budgets");
  add_override(app, f, "--gamma", "gamma", "IID proportion of the data");
  add_override(app, f, "--classes-per-client", "classes_per_client",
               "label classes per client in the skewed part");
  add_override(app, f, "--ratio", "ratio", "fraction of clients selected per round");
  add_override(app, f, "--schedule", "schedule", "round_robin | ad_hoc");
  add_override(app, f, "--variant", "variant",
               "client_backup | server_backup | mixed");
  add_override(app, f, "--tau", "tau", "switch round of cc_fedavg_combined");
  add_override(app, f, "--probe-client", "probe_client",
               "restrict estimation diagnostics to one client");
  add_override(app, f, "--rounds", "rounds", "number of rounds T");
  add_override(app, f, "--workers", "workers", "threads per round");
  app->add_option_function<std::string>(
      "--data",
      [&f](const std::string& v) {
        if (v == "idx") {
          f.overrides.emplace_back("task", "idx-mlp");
        } else if (v != "synthetic") {
          throw ccfl::ConfigError("data", "expected synthetic or idx");
        }
      },
      "synthetic | idx");
  app->add_option_function<std::vector<std::string>>(
      "--method",
      [&f](const std::vector<std::string>& v) {
        std::string joined;
        for (const auto& m : v) joined += (joined.empty() ? "" : ",") + m;
        f.overrides.emplace_back("methods", joined);
      },
      "method label(s), repeatable or comma-separated")
      ->delimiter(',');
  if (with_sweep_flags) {
    add_override(app, f, "--W", "W_override", "two-group period W");
    add_override(app, f, "--r", "r_override", "two-group constrained fraction r");
  }
  app->add_option("--set", f.sets, "extra key=value overrides");
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig c =
      f.config_path.empty() ? ExperimentConfig{} : ccfl::load_config(f.config_path);
  for (const auto& [k, v] : f.overrides) ccfl::set_config_value(c, k, v);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ccfl::ConfigError(kv, "--set expects key=value");
    }
    ccfl::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  ccfl::validate_config(c);
  return c;
}

std::vector<double> parse_reals(const std::string& s, const char* field) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ccfl::ConfigError(field, "bad number '" + item + "'");
    }
  }
  if (out.empty()) throw ccfl::ConfigError(field, "empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated averaging simulator with local-update estimation"};
  app.require_subcommand(1);

  CommonFlags run_flags, grid_flags, eff_flags, probe_flags;
  auto* run_cmd = app.add_subcommand("run", "run every configured method");
  add_common(run_cmd, run_flags, true);

  auto* grid_cmd = app.add_subcommand("grid-rw", "two-group r x W sweep");
  add_common(grid_cmd, grid_flags, false);
  std::string grid_r = "0,0.25,0.5,0.75,1";
  std::string grid_w = "1,2,4,8,16";
  grid_cmd->add_option("--r", grid_r, "comma-separated r values");
  grid_cmd->add_option("--W", grid_w, "comma-separated W values");

  auto* eff_cmd = app.add_subcommand(
      "efficiency", "CC-FedAvg(r=1) for T rounds vs FedAvg for T/W rounds");
  add_common(eff_cmd, eff_flags, false);
  int eff_w = 4;
  eff_cmd->add_option("--W", eff_w, "skip period W (must divide rounds)");

  auto* probe_cmd = app.add_subcommand(
      "probe-lemma2", "second moment of the global update at a frozen state");
  add_common(probe_cmd, probe_flags, false);
  int warmup = 10;
  int resamples = 500;
  probe_cmd->add_option("--warmup", warmup, "rounds run before freezing");
  probe_cmd->add_option("--resamples", resamples, "noise redraws (>= 100)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ccfl::ErrorCategory::kConfig);
  } catch (const ccfl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.category());
  }

  try {
    if (run_cmd->parsed()) {
      const ExperimentConfig c = resolve(run_flags);
      const auto result = ccfl::run_experiment(c);
      for (const auto& f : result.files) std::cout << "wrote " << f << '\n';
      if (result.any_aborted) {
        for (const auto& r : result.runs) {
          if (r.abort_message) std::cerr << *r.abort_message << '\n';
        }
        return static_cast<int>(ccfl::ErrorCategory::kDivergence);
      }
    } else if (grid_cmd->parsed()) {
      ExperimentConfig c = resolve(grid_flags);
      std::vector<int> ws;
      for (double w : parse_reals(grid_w, "W")) ws.push_back(static_cast<int>(w));
      const auto cells = ccfl::run_grid_rw(c, parse_reals(grid_r, "r"), ws);
      std::cout << "wrote " << c.out << " (" << cells.size() << " cells)\n";
    } else if (eff_cmd->parsed()) {
      const ExperimentConfig c = resolve(eff_flags);
      const auto r = ccfl::run_efficiency_comparison(c, eff_w);
      std::cout << "cc_fedavg(r=1): rounds=" << r.cc_fedavg.rounds
                << " steps=" << r.cc_fedavg.local_steps << " acc="
                << (r.cc_fedavg.final_test_acc
                        ? ccfl::format_real(*r.cc_fedavg.final_test_acc)
                        : "-")
                << '\n'
                << "fedavg(T/W):    rounds=" << r.fedavg.rounds
                << " steps=" << r.fedavg.local_steps << " acc="
                << (r.fedavg.final_test_acc
                        ? ccfl::format_real(*r.fedavg.final_test_acc)
                        : "-")
                << '\n'
                << "wrote " << c.out << '\n';
    } else if (probe_cmd->parsed()) {
      CommonFlags& f = probe_flags;
      f.overrides.insert(f.overrides.begin(), {"task", "quadratic"});
      const ExperimentConfig c = resolve(f);
      const auto r = ccfl::run_lemma2_probe(c, warmup, resamples);
      std::ostringstream os;
      os << "lhs,rhs,lhs_stderr,mean_delta_norm_sq,noise_term,n_resamples\n"
         << ccfl::format_real(r.lhs) << ',' << ccfl::format_real(r.rhs) << ','
         << ccfl::format_real(r.lhs_stderr) << ','
         << ccfl::format_real(r.mean_delta_norm_sq) << ','
         << ccfl::format_real(r.noise_term) << ',' << r.n_resamples << '\n';
      std::cout << os.str();
      ccfl::write_file_atomic(c.out, os.str());
      std::cout << (r.lhs <= r.rhs + 3.0 * r.lhs_stderr ? "bound holds"
                                                        : "bound violated")
                << '\n';
    }
  } catch (const ccfl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ccfl::ErrorCategory::kInternal);
  }
  return 0;
}
