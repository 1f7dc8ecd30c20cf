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

#include "ccfl/config.h"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "ccfl/diagnostics.h"
#include "ccfl/errors.h"
#include "ccfl/protocol.h"

namespace ccfl {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

long long to_integer(std::string_view key, std::string_view v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key),
                      "expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

int to_int(std::string_view key, std::string_view v) {
  const long long x = to_integer(key, v);
  if (x < -2147483647LL || x > 2147483647LL) {
    throw ConfigError(std::string(key), "integer out of range");
  }
  return static_cast<int>(x);
}

double to_real(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE ||
      !std::isfinite(x)) {
    throw ConfigError(std::string(key),
                      "expected a finite real, got '" + s + "'");
  }
  return x;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(std::string(key), "expected true/false");
}

template <typename T, typename Fn>
std::string join(const std::vector<T>& v, Fn&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt(v[i]);
  }
  return s;
}

}  // namespace

std::string to_string(TaskKind t) {
  switch (t) {
    case TaskKind::kQuadratic:
      return "quadratic";
    case TaskKind::kSyntheticLogistic:
      return "synthetic-logistic";
    case TaskKind::kSyntheticMlp:
      return "synthetic-mlp";
    case TaskKind::kIdxMlp:
      return "idx-mlp";
  }
  return "unknown";
}

TaskKind parse_task(std::string_view s) {
  if (s == "quadratic") return TaskKind::kQuadratic;
  if (s == "synthetic-logistic") return TaskKind::kSyntheticLogistic;
  if (s == "synthetic-mlp") return TaskKind::kSyntheticMlp;
  if (s == "idx-mlp") return TaskKind::kIdxMlp;
  throw ConfigError("task", "unknown task '" + std::string(s) + "'");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> kKeys = {
      "task",          "n_clients",        "rounds",
      "local_steps",   "eta",              "batch_size",
      "ratio",         "beta",             "p_list",
      "gamma",         "classes_per_client", "schedule",
      "methods",       "variant",          "backup_set",
      "tau",           "W_override",       "r_override",
      "seed",          "seeds",            "out",
      "n_samples",     "input_dim",        "n_classes",
      "hidden_dim",    "quad_dim",         "noise_sigma",
      "sigma_g",       "l_max",            "idx_train_images",
      "idx_train_labels", "idx_test_images", "idx_test_labels",
      "diagnostics",   "track_gradient",   "probe_client",
      "workers",
  };
  return kKeys;
}

void set_config_value(ExperimentConfig& c, std::string_view key,
                      std::string_view raw) {
  const std::string_view v = trim(raw);
  const std::string k(key);
  if (key == "task") {
    c.task = parse_task(v);
  } else if (key == "n_clients") {
    c.n_clients = to_int(k, v);
  } else if (key == "rounds") {
    c.rounds = to_int(k, v);
  } else if (key == "local_steps") {
    c.local_steps = to_int(k, v);
  } else if (key == "eta") {
    c.eta = to_real(k, v);
  } else if (key == "batch_size") {
    c.batch_size = to_int(k, v);
  } else if (key == "ratio") {
    c.ratio = to_real(k, v);
  } else if (key == "beta") {
    c.beta = to_int(k, v);
    c.p_list.reset();
  } else if (key == "p_list") {
    std::vector<double> p;
    for (auto item : split_list(v)) p.push_back(to_real(k, item));
    c.p_list = std::move(p);
    c.beta.reset();
  } else if (key == "gamma") {
    c.gamma = to_real(k, v);
  } else if (key == "classes_per_client") {
    c.classes_per_client = to_int(k, v);
  } else if (key == "schedule") {
    c.schedule = std::string(v);
  } else if (key == "methods") {
    c.methods.clear();
    for (auto item : split_list(v)) c.methods.emplace_back(item);
  } else if (key == "variant") {
    c.variant = std::string(v);
  } else if (key == "backup_set") {
    c.backup_set.clear();
    for (auto item : split_list(v)) c.backup_set.push_back(to_int(k, item));
  } else if (key == "tau") {
    c.tau = to_int(k, v);
  } else if (key == "W_override") {
    if (v.empty()) c.W_override.reset(); else c.W_override = to_int(k, v);
  } else if (key == "r_override") {
    if (v.empty()) c.r_override.reset(); else c.r_override = to_real(k, v);
  } else if (key == "seed") {
    const long long s = to_integer(k, v);
    if (s < 0) throw ConfigError(k, "must be >= 0");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "seeds") {
    c.seeds = to_int(k, v);
  } else if (key == "out") {
    c.out = std::string(v);
  } else if (key == "n_samples") {
    c.n_samples = to_int(k, v);
  } else if (key == "input_dim") {
    c.input_dim = to_int(k, v);
  } else if (key == "n_classes") {
    c.n_classes = to_int(k, v);
  } else if (key == "hidden_dim") {
    c.hidden_dim = to_int(k, v);
  } else if (key == "quad_dim") {
    c.quad_dim = to_int(k, v);
  } else if (key == "noise_sigma") {
    c.noise_sigma = to_real(k, v);
  } else if (key == "sigma_g") {
    c.sigma_g = to_real(k, v);
  } else if (key == "l_max") {
    c.l_max = to_real(k, v);
  } else if (key == "idx_train_images") {
    c.idx_train_images = std::string(v);
  } else if (key == "idx_train_labels") {
    c.idx_train_labels = std::string(v);
  } else if (key == "idx_test_images") {
    c.idx_test_images = std::string(v);
  } else if (key == "idx_test_labels") {
    c.idx_test_labels = std::string(v);
  } else if (key == "diagnostics") {
    c.diagnostics = to_bool(k, v);
  } else if (key == "track_gradient") {
    c.track_gradient = to_bool(k, v);
  } else if (key == "probe_client") {
    if (v.empty()) c.probe_client.reset(); else c.probe_client = to_int(k, v);
  } else if (key == "workers") {
    c.workers = to_int(k, v);
  } else {
    throw ConfigError(k, "unknown key");
  }
}

void validate_config(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* field, const std::string& msg) {
    if (!ok) throw ConfigError(field, msg);
  };
  require(c.n_clients >= 1, "n_clients", "must be >= 1");
  require(c.rounds >= 1, "rounds", "T must be >= 1");
  require(c.local_steps >= 1, "local_steps", "K must be >= 1");
  require(c.eta >= 0.0, "eta", "must be >= 0");
  require(c.batch_size >= 1, "batch_size", "must be >= 1");
  require(c.ratio > 0.0 && c.ratio <= 1.0, "ratio", "must be in (0, 1]");
  require(c.beta.has_value() != c.p_list.has_value(), "beta",
          "exactly one of beta and p_list must be given");
  if (c.beta) {
    require(*c.beta >= 1 && *c.beta <= c.n_clients, "beta",
            "must be in [1, n_clients]");
  }
  if (c.p_list) {
    require(static_cast<int>(c.p_list->size()) == c.n_clients, "p_list",
            "needs one entry per client");
    for (double p : *c.p_list) {
      require(p > 0.0 && p <= 1.0, "p_list", "entries must be in (0, 1]");
    }
  }
  require(c.gamma >= 0.0 && c.gamma <= 1.0, "gamma", "must be in [0, 1]");
  require(c.classes_per_client >= 1, "classes_per_client", "must be >= 1");
  try {
    parse_schedule(c.schedule);
  } catch (const Error& e) {
    throw ConfigError("schedule", e.what());
  }
  try {
    parse_variant(c.variant);
  } catch (const Error& e) {
    throw ConfigError("variant", e.what());
  }
  require(!c.methods.empty(), "methods", "at least one method is required");
  for (const auto& m : c.methods) {
    try {
      parse_method(m, c.tau, c.W_override.value_or(1));
    } catch (const Error& e) {
      throw ConfigError("methods", e.what());
    }
  }
  for (int id : c.backup_set) {
    require(id >= 0 && id < c.n_clients, "backup_set", "client id out of range");
  }
  require(c.tau >= 0, "tau", "must be >= 0");
  require(c.W_override.has_value() == c.r_override.has_value(), "W_override",
          "W_override and r_override describe a two-group sweep; give both");
  if (c.W_override) require(*c.W_override >= 1, "W_override", "must be >= 1");
  if (c.r_override) {
    require(*c.r_override >= 0.0 && *c.r_override <= 1.0, "r_override",
            "must be in [0, 1]");
  }
  require(c.seeds >= 1, "seeds", "must be >= 1");
  require(!c.out.empty(), "out", "must be non-empty");
  require(c.n_samples >= 1, "n_samples", "must be >= 1");
  require(c.input_dim >= 1, "input_dim", "must be >= 1");
  require(c.n_classes >= 2, "n_classes", "must be >= 2");
  require(c.hidden_dim >= 1, "hidden_dim", "must be >= 1");
  require(c.quad_dim >= 1, "quad_dim", "must be >= 1");
  require(c.noise_sigma >= 0.0, "noise_sigma", "must be >= 0");
  require(c.sigma_g >= 0.0, "sigma_g", "must be >= 0");
  require(c.l_max >= 0.1, "l_max", "must be >= 0.1");
  if (c.task == TaskKind::kIdxMlp) {
    require(!c.idx_train_images.empty(), "idx_train_images",
            "required for idx-mlp");
    require(!c.idx_train_labels.empty(), "idx_train_labels",
            "required for idx-mlp");
  }
  if (c.probe_client) {
    require(*c.probe_client >= 0 && *c.probe_client < c.n_clients,
            "probe_client", "client id out of range");
  }
  require(c.workers >= 1, "workers", "must be >= 1");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no),
                        "expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (!seen.insert(key).second) throw ConfigError(key, "given twice");
    set_config_value(c, key, line.substr(eq + 1));
  }
  if (seen.contains("beta") && seen.contains("p_list")) {
    throw ConfigError("beta", "beta and p_list are mutually exclusive");
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto kv = [&](const char* k, const std::string& v) {
    os << k << " = " << v << '\n';
  };
  auto ints = [](const std::vector<int>& v) {
    return join(v, [](int x) { return std::to_string(x); });
  };
  kv("task", to_string(c.task));
  kv("n_clients", std::to_string(c.n_clients));
  kv("rounds", std::to_string(c.rounds));
  kv("local_steps", std::to_string(c.local_steps));
  kv("eta", format_real(c.eta));
  kv("batch_size", std::to_string(c.batch_size));
  kv("ratio", format_real(c.ratio));
  if (c.beta) kv("beta", std::to_string(*c.beta));
  if (c.p_list) kv("p_list", join(*c.p_list, format_real));
  kv("gamma", format_real(c.gamma));
  kv("classes_per_client", std::to_string(c.classes_per_client));
  kv("schedule", c.schedule);
  kv("methods", join(c.methods, [](const std::string& s) { return s; }));
  kv("variant", c.variant);
  kv("backup_set", ints(c.backup_set));
  kv("tau", std::to_string(c.tau));
  if (c.W_override) kv("W_override", std::to_string(*c.W_override));
  if (c.r_override) kv("r_override", format_real(*c.r_override));
  kv("seed", std::to_string(c.seed));
  kv("seeds", std::to_string(c.seeds));
  kv("out", c.out);
  kv("n_samples", std::to_string(c.n_samples));
  kv("input_dim", std::to_string(c.input_dim));
  kv("n_classes", std::to_string(c.n_classes));
  kv("hidden_dim", std::to_string(c.hidden_dim));
  kv("quad_dim", std::to_string(c.quad_dim));
  kv("noise_sigma", format_real(c.noise_sigma));
  kv("sigma_g", format_real(c.sigma_g));
  kv("l_max", format_real(c.l_max));
  kv("idx_train_images", c.idx_train_images);
  kv("idx_train_labels", c.idx_train_labels);
  kv("idx_test_images", c.idx_test_images);
  kv("idx_test_labels", c.idx_test_labels);
  kv("diagnostics", c.diagnostics ? "true" : "false");
  kv("track_gradient", c.track_gradient ? "true" : "false");
  if (c.probe_client) kv("probe_client", std::to_string(*c.probe_client));
  kv("workers", std::to_string(c.workers));
  return os.str();
}

}  // namespace ccfl
