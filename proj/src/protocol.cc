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

#include "ccfl/protocol.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "ccfl/errors.h"

namespace ccfl {
namespace {

constexpr double kDivergenceBound = 1e8;

bool out_of_bounds(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v) || std::abs(v) > kDivergenceBound) return true;
  }
  return false;
}

int parse_int_suffix(std::string_view s, std::string_view label) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidArgument("bad method parameter in '" + std::string(label) +
                          "'");
  }
  return v;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t n_threads = std::min<std::size_t>(n, workers);
  std::vector<std::exception_ptr> errors(n_threads);
  {
    std::vector<std::jthread> threads;
    threads.reserve(n_threads);
    for (std::size_t w = 0; w < n_threads; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += n_threads) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool stored_on_server(const MethodSpec& spec, int id) {
  if (!uses_history(spec.method)) return false;
  switch (spec.variant) {
    case BackupVariant::kClientBackup:
      return false;
    case BackupVariant::kServerBackup:
      return true;
    case BackupVariant::kMixed:
      return !spec.backup_set.contains(id);
  }
  return false;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::kFedAvgFull:
      return "fedavg_full";
    case Method::kFedAvgDropout:
      return "fedavg_dropout";
    case Method::kStrategy1:
      return "strategy1";
    case Method::kStrategy2:
      return "strategy2";
    case Method::kCcFedAvg:
      return "cc_fedavg";
    case Method::kCcFedAvgCombined:
      return "cc_fedavg_combined";
    case Method::kFedNova:
      return "fednova";
    case Method::kFedOptSync:
      return "fedopt_sync";
  }
  return "unknown";
}

std::string to_string(BackupVariant v) {
  switch (v) {
    case BackupVariant::kClientBackup:
      return "client_backup";
    case BackupVariant::kServerBackup:
      return "server_backup";
    case BackupVariant::kMixed:
      return "mixed";
  }
  return "unknown";
}

std::string to_string(Schedule s) {
  return s == Schedule::kRoundRobin ? "round_robin" : "ad_hoc";
}

BackupVariant parse_variant(std::string_view s) {
  if (s == "client_backup") return BackupVariant::kClientBackup;
  if (s == "server_backup") return BackupVariant::kServerBackup;
  if (s == "mixed") return BackupVariant::kMixed;
  throw InvalidArgument("unknown variant '" + std::string(s) + "'");
}

Schedule parse_schedule(std::string_view s) {
  if (s == "round_robin") return Schedule::kRoundRobin;
  if (s == "ad_hoc") return Schedule::kAdHoc;
  throw InvalidArgument("unknown schedule '" + std::string(s) + "'");
}

bool uses_history(Method m) {
  return m == Method::kCcFedAvg || m == Method::kCcFedAvgCombined ||
         m == Method::kFedOptSync;
}

std::string MethodSpec::label() const {
  switch (method) {
    case Method::kCcFedAvgCombined:
      return to_string(method) + ":" + std::to_string(tau);
    case Method::kFedOptSync:
      return to_string(method) + ":" + std::to_string(sync_period);
    default:
      return to_string(method);
  }
}

MethodSpec parse_method(std::string_view label, int default_tau,
                        int default_sync_period) {
  const auto colon = label.find(':');
  const std::string_view name = label.substr(0, colon);
  std::optional<int> param;
  if (colon != std::string_view::npos) {
    param = parse_int_suffix(label.substr(colon + 1), label);
  }
  MethodSpec spec;
  static const std::pair<std::string_view, Method> kNames[] = {
      {"fedavg_full", Method::kFedAvgFull},
      {"fedavg_dropout", Method::kFedAvgDropout},
      {"strategy1", Method::kStrategy1},
      {"strategy2", Method::kStrategy2},
      {"cc_fedavg", Method::kCcFedAvg},
      {"cc_fedavg_combined", Method::kCcFedAvgCombined},
      {"fednova", Method::kFedNova},
      {"fedopt_sync", Method::kFedOptSync},
  };
  const auto it = std::find_if(std::begin(kNames), std::end(kNames),
                               [&](const auto& e) { return e.first == name; });
  if (it == std::end(kNames)) {
    throw InvalidArgument("unknown method '" + std::string(label) + "'");
  }
  spec.method = it->second;
  if (param && spec.method != Method::kCcFedAvgCombined &&
      spec.method != Method::kFedOptSync) {
    throw InvalidArgument("method '" + std::string(name) +
                          "' takes no parameter");
  }
  if (spec.method == Method::kCcFedAvgCombined) {
    spec.tau = param.value_or(default_tau);
    if (spec.tau < 0) throw InvalidArgument("tau must be >= 0");
  }
  if (spec.method == Method::kFedOptSync) {
    spec.sync_period = param.value_or(default_sync_period);
    if (spec.sync_period < 1) throw InvalidArgument("W must be >= 1");
  }
  return spec;
}

RngStream train_stream(const RoundKeys& keys, int client, int round) {
  return RngStream::For(keys.seed, StreamPurpose::kTrain,
                        static_cast<std::uint64_t>(client),
                        (keys.train_salt << 32) ^
                            static_cast<std::uint64_t>(round));
}

std::vector<int> select_from_pool(std::span<const int> pool, std::size_t count,
                                  RngStream& rng) {
  std::vector<int> ids(pool.begin(), pool.end());
  count = std::min(count, ids.size());
  if (count < ids.size()) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.uniform_int(ids.size() - i);
      std::swap(ids[i], ids[j]);
    }
    ids.resize(count);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<int> select_clients(int n, double ratio, RngStream& rng) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw InvalidArgument("select_clients: ratio must be in (0, 1]");
  }
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const auto m = std::max<long>(1, std::lround(ratio * n));
  return select_from_pool(all, static_cast<std::size_t>(m), rng);
}

Participation decide_participation(ClientRecord& client, Schedule schedule,
                                   RngStream& rng) {
  if (schedule == Schedule::kRoundRobin) {
    const int period = std::max(1, static_cast<int>(std::lround(1.0 / client.p)));
    const bool train = client.rr_counter % period == 0;
    ++client.rr_counter;
    return train ? Participation::kTrain : Participation::kEstimate;
  }
  return rng.uniform() < client.p ? Participation::kTrain
                                  : Participation::kEstimate;
}

LocalResult local_train(const ParamVec& x_t, const Objective& objective,
                        int steps, double eta, std::size_t batch_size,
                        RngStream& rng) {
  if (steps < 1) throw InvalidArgument("local_train: K must be >= 1");
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw InvalidArgument("local_train: eta must be finite and >= 0");
  }
  if (x_t.dim() != objective.dim()) {
    throw DimensionError("local_train: model vs objective");
  }
  const std::size_t d = x_t.dim();
  std::vector<double> x(x_t.values().begin(), x_t.values().end());
  std::vector<double> g(d);
  for (int k = 0; k < steps; ++k) {
    objective.stochastic_gradient_into(x, batch_size, rng, g, nullptr);
    for (std::size_t j = 0; j < d; ++j) x[j] -= eta * g[j];
    if (out_of_bounds(x)) throw DivergenceError("", -1, -1, k);
  }
  std::vector<double> delta(d);
  for (std::size_t j = 0; j < d; ++j) delta[j] = x[j] - x_t[j];
  return {ParamVec(std::move(delta)), ParamVec(std::move(x))};
}

ParamVec estimate_strategy3(const std::optional<ParamVec>& last_delta,
                            std::size_t dim) {
  if (!last_delta) return ParamVec::Zeros(dim);
  if (last_delta->dim() != dim) {
    throw DimensionError("estimate_strategy3: stored delta");
  }
  return *last_delta;
}

ParamVec estimate_strategy2(const std::optional<ParamVec>& last_local_model,
                            const ParamVec& x_t) {
  if (!last_local_model) return ParamVec::Zeros(x_t.dim());
  return sub(*last_local_model, x_t);
}

ParamVec estimate_combined(const std::optional<ParamVec>& last_delta,
                           const std::optional<ParamVec>& last_local_model,
                           const ParamVec& x_t, int t, int tau) {
  if (t < tau) return estimate_strategy3(last_delta, x_t.dim());
  return estimate_strategy2(last_local_model, x_t);
}

ParamVec aggregate(const std::map<int, ParamVec>& contributions,
                   AggregationMode mode, std::size_t n_selected,
                   std::size_t dim) {
  const std::size_t divisor =
      mode == AggregationMode::kAllSelected ? n_selected : contributions.size();
  if (contributions.empty() || divisor == 0) return ParamVec::Zeros(dim);
  if (contributions.size() > divisor) {
    throw InvalidArgument("aggregate: more contributions than selected");
  }
  std::vector<double> sum(dim, 0.0);
  for (const auto& [id, delta] : contributions) {
    if (delta.dim() != dim) throw DimensionError("aggregate: contribution");
    for (std::size_t j = 0; j < dim; ++j) sum[j] += delta[j];
  }
  const double n = static_cast<double>(divisor);
  for (double& v : sum) v /= n;
  return ParamVec(std::move(sum));
}

ParamVec fednova_aggregate(const std::map<int, NovaUpdate>& updates) {
  if (updates.empty()) throw InvalidArgument("fednova_aggregate: no updates");
  const std::size_t dim = updates.begin()->second.delta.dim();
  std::vector<double> sum(dim, 0.0);
  double steps_sum = 0.0;
  for (const auto& [id, u] : updates) {
    if (u.steps < 1) throw InvalidArgument("fednova_aggregate: K_i must be >= 1");
    if (u.delta.dim() != dim) throw DimensionError("fednova_aggregate");
    const double k = static_cast<double>(u.steps);
    for (std::size_t j = 0; j < dim; ++j) sum[j] += u.delta[j] / k;
    steps_sum += k;
  }
  const double n = static_cast<double>(updates.size());
  const double tau_eff = steps_sum / n;
  for (double& v : sum) v = tau_eff * (v / n);
  return ParamVec(std::move(sum));
}

int fednova_steps(double p, int local_steps) {
  return std::max(1, static_cast<int>(std::lround(p * local_steps)));
}

std::vector<ClientRecord> make_clients(const BudgetAssignment& budgets,
                                       const MethodSpec& spec,
                                       int total_rounds, double ratio) {
  const int n = static_cast<int>(budgets.p.size());
  const double per_round =
      static_cast<double>(std::max<long>(1, std::lround(ratio * n)));
  std::vector<ClientRecord> clients(n);
  for (int i = 0; i < n; ++i) {
    clients[i].id = i;
    clients[i].p = budgets.p[i];
    if (spec.method == Method::kFedAvgDropout && budgets.p[i] < 1.0) {
      const double expected = total_rounds * per_round / n;
      clients[i].quota = static_cast<int>(std::lround(budgets.p[i] * expected));
    }
  }
  return clients;
}

std::optional<ParamVec> stored_delta(const GlobalState& state,
                                     const ClientRecord& client,
                                     const MethodSpec& spec) {
  if (stored_on_server(spec, client.id)) {
    const auto it = state.history.find(client.id);
    if (it == state.history.end()) return std::nullopt;
    return it->second;
  }
  return client.last_delta;
}

RoundOutcome run_round(GlobalState& state, const MethodSpec& spec,
                       std::vector<ClientRecord>& clients,
                       std::span<const Objective> objectives,
                       const Hyper& hyper, const RoundKeys& keys,
                       int workers) {
  const int n = static_cast<int>(clients.size());
  if (static_cast<int>(objectives.size()) != n) {
    throw DimensionError("run_round: clients vs objectives");
  }
  const int t = state.t;
  const std::size_t dim = state.x.dim();
  const std::string label = spec.label();

  RoundOutcome out{.round = t,
                   .delta = ParamVec::Zeros(dim),
                   .next_model = state.x};

  // Selection over the eligible pool.
  std::vector<int> pool;
  pool.reserve(n);
  for (const auto& c : clients) {
    if (!c.quota || c.rounds_trained < *c.quota) pool.push_back(c.id);
  }
  RngStream select_rng = RngStream::For(keys.seed, StreamPurpose::kSelection,
                                        0, static_cast<std::uint64_t>(t));
  if (!(hyper.ratio > 0.0 && hyper.ratio <= 1.0)) {
    throw InvalidArgument("run_round: ratio must be in (0, 1]");
  }
  const auto m = static_cast<std::size_t>(
      std::max<long>(1, std::lround(hyper.ratio * n)));
  out.selected = select_from_pool(pool, m, select_rng);

  // Per-client decisions.
  enum class Action { kTrain, kEstimate, kSkip };
  std::vector<Action> actions(out.selected.size());
  for (std::size_t s = 0; s < out.selected.size(); ++s) {
    ClientRecord& c = clients[out.selected[s]];
    Participation part = Participation::kTrain;
    switch (spec.method) {
      case Method::kFedAvgFull:
      case Method::kFedAvgDropout:
      case Method::kFedNova:
        break;
      case Method::kFedOptSync:
        part = t % spec.sync_period == 0 ? Participation::kTrain
                                         : Participation::kEstimate;
        break;
      default: {
        RngStream rng = RngStream::For(keys.seed, StreamPurpose::kSchedule,
                                       static_cast<std::uint64_t>(c.id),
                                       static_cast<std::uint64_t>(t));
        part = decide_participation(c, spec.schedule, rng);
      }
    }
    if (part == Participation::kTrain) {
      actions[s] = Action::kTrain;
    } else {
      actions[s] = spec.method == Method::kStrategy1 ? Action::kSkip
                                                     : Action::kEstimate;
    }
  }

  // Local work, one slot per selected client.
  std::vector<std::optional<ParamVec>> contrib(out.selected.size());
  std::vector<std::optional<ParamVec>> final_models(out.selected.size());
  std::vector<int> steps_used(out.selected.size(), 0);
  parallel_for(out.selected.size(), workers, [&](std::size_t s) {
    const int id = out.selected[s];
    const ClientRecord& c = clients[id];
    if (actions[s] == Action::kTrain) {
      const int k = spec.method == Method::kFedNova
                        ? fednova_steps(c.p, hyper.local_steps)
                        : hyper.local_steps;
      RngStream rng = train_stream(keys, id, t);
      try {
        LocalResult r = local_train(state.x, objectives[id], k, hyper.eta,
                                    hyper.batch_size, rng);
        contrib[s] = std::move(r.delta);
        final_models[s] = std::move(r.final_model);
      } catch (const DivergenceError& e) {
        throw DivergenceError(label, t, id, e.step());
      }
      steps_used[s] = k;
    } else if (actions[s] == Action::kEstimate) {
      switch (spec.method) {
        case Method::kStrategy2:
          contrib[s] = estimate_strategy2(c.last_local_model, state.x);
          break;
        case Method::kCcFedAvgCombined:
          contrib[s] = estimate_combined(stored_delta(state, c, spec),
                                         c.last_local_model, state.x, t,
                                         spec.tau);
          break;
        default:
          contrib[s] = estimate_strategy3(stored_delta(state, c, spec), dim);
      }
    }
  });

  // Bookkeeping and history writes, ascending id.
  std::map<int, NovaUpdate> nova;
  for (std::size_t s = 0; s < out.selected.size(); ++s) {
    const int id = out.selected[s];
    ClientRecord& c = clients[id];
    switch (actions[s]) {
      case Action::kTrain:
        out.trained.push_back(id);
        out.local_steps += steps_used[s];
        ++c.rounds_trained;
        c.last_local_model = *final_models[s];
        if (stored_on_server(spec, id)) {
          state.history.insert_or_assign(id, *contrib[s]);
        } else {
          c.last_delta = *contrib[s];
        }
        if (spec.method == Method::kFedNova) {
          nova.emplace(id, NovaUpdate{*contrib[s], steps_used[s]});
        }
        out.contributions.emplace(id, std::move(*contrib[s]));
        break;
      case Action::kEstimate:
        out.estimated.push_back(id);
        out.contributions.emplace(id, std::move(*contrib[s]));
        break;
      case Action::kSkip:
        out.skipped_entirely.push_back(id);
        break;
    }
  }

  if (spec.method == Method::kFedNova) {
    if (!nova.empty()) out.delta = fednova_aggregate(nova);
  } else {
    const auto mode = spec.method == Method::kStrategy1
                          ? AggregationMode::kReceivedOnly
                          : AggregationMode::kAllSelected;
    out.delta = aggregate(out.contributions, mode, out.selected.size(), dim);
  }
  if (out.contributions.empty()) {
    out.warnings.push_back("round " + std::to_string(t) +
                           ": no contributions received; applying zero update");
  }

  std::vector<double> next(dim);
  for (std::size_t j = 0; j < dim; ++j) next[j] = state.x[j] + out.delta[j];
  if (out_of_bounds(next)) throw DivergenceError(label, t, -1, -1);
  out.next_model = ParamVec(std::move(next));
  state.x = out.next_model;
  state.t = t + 1;
  return out;
}

GlobalState fedopt_sync_round(const GlobalState& state,
                              std::vector<ClientRecord>& clients,
                              std::span<const Objective> objectives,
                              const Hyper& hyper, const RoundKeys& keys,
                              int W) {
  if (W < 1) throw InvalidArgument("fedopt_sync_round: W must be >= 1");
  if (state.t % W != 0) {
    throw InvalidArgument("fedopt_sync_round: round must be a multiple of W");
  }
  MethodSpec spec;
  spec.method = Method::kFedOptSync;
  spec.sync_period = W;
  GlobalState s = state;
  for (int k = 0; k < W; ++k) {
    run_round(s, spec, clients, objectives, hyper, keys);
  }
  return s;
}

Federation::Federation(std::vector<Objective> objectives,
                       const BudgetAssignment& budgets, MethodSpec spec,
                       Hyper hyper, ParamVec x0, int total_rounds,
                       std::uint64_t seed, int workers)
    : objectives_(std::move(objectives)),
      spec_(std::move(spec)),
      hyper_(hyper),
      state_{.x = std::move(x0)},
      clients_(make_clients(budgets, spec_, total_rounds, hyper.ratio)),
      seed_(seed),
      workers_(workers) {
  if (objectives_.size() != budgets.p.size()) {
    throw DimensionError("Federation: objectives vs budgets");
  }
  for (const auto& o : objectives_) {
    if (o.dim() != state_.x.dim()) throw DimensionError("Federation: x0 dim");
  }
}

RoundOutcome Federation::step() {
  RoundOutcome out = run_round(state_, spec_, clients_, objectives_, hyper_,
                               RoundKeys{seed_, 0}, workers_);
  local_steps_ += out.local_steps;
  return out;
}

}  // namespace ccfl
