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

#include "ccfl/diagnostics.h"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ccfl/errors.h"

namespace ccfl {
namespace {

std::optional<double> safe_cosine(const ParamVec& a, const ParamVec& b) {
  if (norm_sq(a) == 0.0 || norm_sq(b) == 0.0) return std::nullopt;
  return cosine(a, b);
}

void put_optional(std::ostringstream& os, const std::optional<double>& v) {
  if (v) os << format_real(*v);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_real(const std::string& s, const std::string& path) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw IoError(path, "bad real field '" + s + "'");
  }
  return v;
}

std::optional<double> parse_optional(const std::string& s,
                                     const std::string& path) {
  if (s.empty()) return std::nullopt;
  return parse_real(s, path);
}

long long parse_integer(const std::string& s, const std::string& path) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw IoError(path, "bad integer field '" + s + "'");
  }
  return v;
}

}  // namespace

ShadowError shadow_estimation_error(
    const std::optional<ParamVec>& last_delta,
    const std::optional<ParamVec>& last_local_model, const ParamVec& x_t,
    const ParamVec& true_delta) {
  ShadowError out;
  const ParamVec true_model = add(x_t, true_delta);
  if (last_delta) {
    out.e3 = l2_dist_sq(true_model, add(x_t, *last_delta));
    out.c3 = safe_cosine(true_delta, *last_delta);
  }
  if (last_local_model) {
    out.e2 = l2_dist_sq(true_model, *last_local_model);
    out.c2 = safe_cosine(true_delta, sub(*last_local_model, x_t));
  }
  return out;
}

std::vector<ShadowError> shadow_round(const Federation& federation,
                                      const ParamVec& x_t,
                                      const RoundOutcome& outcome,
                                      std::optional<int> probe_client) {
  std::vector<ShadowError> out;
  const Hyper& hyper = federation.hyper();
  const RoundKeys keys{federation.seed(), 0};
  for (int id : outcome.estimated) {
    if (probe_client && *probe_client != id) continue;
    const ClientRecord& c = federation.clients()[id];
    RngStream rng = train_stream(keys, id, outcome.round);
    const LocalResult shadow =
        local_train(x_t, federation.objectives()[id], hyper.local_steps,
                    hyper.eta, hyper.batch_size, rng);
    out.push_back(shadow_estimation_error(
        stored_delta(federation.state(), c, federation.spec()),
        c.last_local_model, x_t, shadow.delta));
  }
  return out;
}

double track_global_gradient(std::span<const Objective> objectives,
                             const ParamVec& x) {
  if (objectives.empty()) throw InvalidArgument("no objectives");
  std::vector<double> sum(x.dim(), 0.0);
  std::vector<double> g(x.dim());
  for (const Objective& obj : objectives) {
    obj.full_gradient_into(x.values(), g);
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += g[j];
  }
  const double n = static_cast<double>(objectives.size());
  double s = 0.0;
  for (double v : sum) {
    const double m = v / n;
    s += m * m;
  }
  return s;
}

Lemma2Result lemma2_probe(const Federation& federation, int n_resamples,
                          std::uint64_t probe_seed) {
  if (n_resamples < 100) {
    throw InvalidArgument("lemma2_probe: n_resamples must be >= 100");
  }
  const auto& objectives = federation.objectives();
  const std::size_t dim = federation.state().x.dim();
  std::vector<double> mean_delta(dim, 0.0);
  double mean_sq = 0.0;
  double m2 = 0.0;
  for (int s = 0; s < n_resamples; ++s) {
    GlobalState state = federation.state();
    std::vector<ClientRecord> clients = federation.clients();
    const RoundKeys keys{federation.seed(),
                         mix64(probe_seed * 0x2545f4914f6cdd1dULL +
                               static_cast<std::uint64_t>(s)) | 1};
    const RoundOutcome out = run_round(state, federation.spec(), clients,
                                       objectives, federation.hyper(), keys);
    // Incremental means: identical samples reproduce their value exactly.
    const double k = static_cast<double>(s + 1);
    for (std::size_t j = 0; j < dim; ++j) {
      mean_delta[j] += (out.delta[j] - mean_delta[j]) / k;
    }
    const double v = norm_sq(out.delta);
    const double d = v - mean_sq;
    mean_sq += d / k;
    m2 += d * (v - mean_sq);
  }
  double mean_norm = 0.0;
  for (double v : mean_delta) mean_norm += v * v;

  double sigma_sq = 0.0;
  for (const Objective& o : objectives) {
    sigma_sq = std::max(sigma_sq, o.injected_noise_variance());
  }
  const Hyper& h = federation.hyper();
  const double n_clients = static_cast<double>(objectives.size());
  const double noise = h.local_steps * h.eta * h.eta * sigma_sq / n_clients;
  const double var = n_resamples > 1 ? m2 / (n_resamples - 1) : 0.0;
  return Lemma2Result{
      .lhs = mean_sq,
      .rhs = mean_norm + noise,
      .lhs_stderr = std::sqrt(var / n_resamples),
      .mean_delta_norm_sq = mean_norm,
      .noise_term = noise,
      .n_resamples = n_resamples,
  };
}

std::optional<double> mean_present(std::span<const std::optional<double>> v) {
  double s = 0.0;
  int n = 0;
  for (const auto& x : v) {
    if (x) {
      s += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / n;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, std::string("cannot open for writing: ") +
                                      std::strerror(errno));
    out << contents;
    out.flush();
    if (!out) throw IoError(path, "write failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError(path, std::string("rename failed: ") + std::strerror(errno));
  }
}

void write_metrics(std::span<const MetricRow> rows, const std::string& path) {
  std::ostringstream os;
  os << kMetricsHeader << '\n';
  for (const MetricRow& r : rows) {
    os << r.round << ',' << r.method << ',' << r.seed << ','
       << format_real(r.test_loss) << ',';
    put_optional(os, r.test_acc);
    os << ',' << format_real(r.grad_norm_sq) << ','
       << format_real(r.min_grad_norm_sq) << ',';
    put_optional(os, r.est_err_s2);
    os << ',';
    put_optional(os, r.est_err_s3);
    os << ',';
    put_optional(os, r.cos_s2);
    os << ',';
    put_optional(os, r.cos_s3);
    os << ',' << r.trained_count << ',' << r.estimated_count << '\n';
  }
  write_file_atomic(path, os.str());
}

std::vector<MetricRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open");
  std::string line;
  if (!std::getline(in, line)) throw IoError(path, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw IoError(path, "unexpected header");
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 13) throw IoError(path, "expected 13 fields: " + line);
    MetricRow r;
    r.round = static_cast<int>(parse_integer(f[0], path));
    r.method = f[1];
    r.seed = static_cast<std::uint64_t>(std::strtoull(f[2].c_str(), nullptr, 10));
    r.test_loss = parse_real(f[3], path);
    r.test_acc = parse_optional(f[4], path);
    r.grad_norm_sq = parse_real(f[5], path);
    r.min_grad_norm_sq = parse_real(f[6], path);
    r.est_err_s2 = parse_optional(f[7], path);
    r.est_err_s3 = parse_optional(f[8], path);
    r.cos_s2 = parse_optional(f[9], path);
    r.cos_s3 = parse_optional(f[10], path);
    r.trained_count = static_cast<int>(parse_integer(f[11], path));
    r.estimated_count = static_cast<int>(parse_integer(f[12], path));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace ccfl
