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

#ifndef CCFL_PROTOCOL_H_
#define CCFL_PROTOCOL_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccfl/data.h"
#include "ccfl/objective.h"
#include "ccfl/param_vec.h"
#include "ccfl/rng.h"

namespace ccfl {

enum class Method {
  kFedAvgFull,        // every selected client trains
  kFedAvgDropout,     // trains until its participation quota runs out
  kStrategy1,         // skipping clients are dropped from aggregation
  kStrategy2,         // skipping clients resend their last local model
  kCcFedAvg,          // skipping clients resend their last update
  kCcFedAvgCombined,  // last update before round tau, last model after
  kFedNova,           // budget spent as fewer local steps, normalized mean
  kFedOptSync,        // all clients train every W-th round, replay between
};

// Where a client's last update is kept between rounds.
enum class BackupVariant { kClientBackup, kServerBackup, kMixed };

enum class Schedule { kRoundRobin, kAdHoc };

struct MethodSpec {
  Method method = Method::kCcFedAvg;
  int tau = 0;          // kCcFedAvgCombined
  int sync_period = 1;  // kFedOptSync (W)
  BackupVariant variant = BackupVariant::kClientBackup;
  std::set<int> backup_set;  // kMixed: ids that keep their history locally
  Schedule schedule = Schedule::kAdHoc;

  // Method label as written to metrics files, e.g. "cc_fedavg",
  // "cc_fedavg_combined:100", "fedopt_sync:4". parse_method() accepts it.
  std::string label() const;

  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

// Parses a method label. A bare "cc_fedavg_combined" / "fedopt_sync"
// takes tau / W from the arguments. Throws InvalidArgument.
MethodSpec parse_method(std::string_view label, int default_tau = 0,
                        int default_sync_period = 1);

std::string to_string(Method m);
std::string to_string(BackupVariant v);
std::string to_string(Schedule s);
BackupVariant parse_variant(std::string_view s);
Schedule parse_schedule(std::string_view s);

// True for the methods whose skipping clients replay stored history.
bool uses_history(Method m);

struct ClientRecord {
  int id = 0;
  double p = 1.0;
  std::optional<ParamVec> last_delta;        // client-side history copy
  std::optional<ParamVec> last_local_model;  // x_{t-1,K}, for Strategy 2
  int rounds_trained = 0;
  std::optional<int> quota;  // kFedAvgDropout only
  int rr_counter = 0;        // round-robin phase, bumped on every selection
};

struct GlobalState {
  ParamVec x;
  int t = 0;
  std::map<int, ParamVec> history;  // server-side copies of last updates
};

struct RoundOutcome {
  int round = 0;
  std::vector<int> selected;          // S_t, ascending
  std::vector<int> trained;           // ran local SGD
  std::vector<int> estimated;         // produced an estimate instead
  std::vector<int> skipped_entirely;  // dropped from aggregation
  std::map<int, ParamVec> contributions;
  ParamVec delta;
  ParamVec next_model;
  long local_steps = 0;
  std::vector<std::string> warnings;
};

struct Hyper {
  int local_steps = 10;  // K
  double eta = 0.05;
  std::size_t batch_size = 32;
  double ratio = 1.0;  // fraction of clients selected per round
};

// Seeds for one round's streams. A non-zero `train_salt` redraws every
// minibatch / gradient-noise stream while keeping selection and schedule
// draws fixed (used by resampling probes).
struct RoundKeys {
  std::uint64_t seed = 0;
  std::uint64_t train_salt = 0;
};

// Minibatch / noise stream of client `client` in round `round`.
RngStream train_stream(const RoundKeys& keys, int client, int round);

// Uniform sample of round(ratio * n) (at least 1) ids without replacement,
// returned ascending. ratio == 1 returns every id without drawing.
std::vector<int> select_clients(int n, double ratio, RngStream& rng);

// Same, over an explicit pool of eligible ids, capped at the pool size.
std::vector<int> select_from_pool(std::span<const int> pool, std::size_t count,
                                  RngStream& rng);

enum class Participation { kTrain, kEstimate };

// Round-robin: train iff rr_counter % round(1/p) == 0, counter bumped on
// every call. Ad-hoc: train iff rng.uniform() < p.
Participation decide_participation(ClientRecord& client, Schedule schedule,
                                   RngStream& rng);

struct LocalResult {
  ParamVec delta;        // x_{t,K} - x_{t,0}
  ParamVec final_model;  // x_{t,K}
};

// K steps of x <- x - eta * g from x_t. Throws DivergenceError (round and
// client unset, step filled) if a parameter becomes non-finite or exceeds
// 1e8 in magnitude.
LocalResult local_train(const ParamVec& x_t, const Objective& objective,
                        int steps, double eta, std::size_t batch_size,
                        RngStream& rng);

// Replays the stored update unchanged; zeros if the client never trained.
ParamVec estimate_strategy3(const std::optional<ParamVec>& last_delta,
                            std::size_t dim);

// The last local model expressed as a displacement from x_t; zeros if the
// client never trained.
ParamVec estimate_strategy2(const std::optional<ParamVec>& last_local_model,
                            const ParamVec& x_t);

// Strategy 3 while t < tau, Strategy 2 from round tau on.
ParamVec estimate_combined(const std::optional<ParamVec>& last_delta,
                           const std::optional<ParamVec>& last_local_model,
                           const ParamVec& x_t, int t, int tau);

enum class AggregationMode { kAllSelected, kReceivedOnly };

// Unweighted mean of the contributions, summed in ascending id order.
// kAllSelected divides by `n_selected`; kReceivedOnly by the number of
// contributions. With nothing to average the result is zeros(dim).
ParamVec aggregate(const std::map<int, ParamVec>& contributions,
                   AggregationMode mode, std::size_t n_selected,
                   std::size_t dim);

struct NovaUpdate {
  ParamVec delta;  // x_{t,K_i} - x_t
  int steps;       // K_i
};

// Normalized averaging: d_i = -delta_i / (eta K_i), result
// -eta * mean(K_i) * mean(d_i) = mean(K_i) * mean(delta_i / K_i).
ParamVec fednova_aggregate(const std::map<int, NovaUpdate>& updates);

// K_i = max(1, round(p * K)).
int fednova_steps(double p, int local_steps);

// Fresh client records for a run. Dropout quotas are
// round(p_i * T * m / N) with m the per-round selection size; clients with
// p_i = 1 have no quota.
std::vector<ClientRecord> make_clients(const BudgetAssignment& budgets,
                                       const MethodSpec& spec,
                                       int total_rounds, double ratio);

// The update a skipping client would replay, read from wherever `spec`
// keeps it (client record or server history).
std::optional<ParamVec> stored_delta(const GlobalState& state,
                                     const ClientRecord& client,
                                     const MethodSpec& spec);

// One full round: select, decide, train or estimate, aggregate, and apply
// x_{t+1} = x_t + delta. Mutates `state` (x, t, history) and `clients`.
// Per-client work runs on up to `workers` threads; the reduction order is
// fixed so results do not depend on the worker count.
RoundOutcome run_round(GlobalState& state, const MethodSpec& spec,
                       std::vector<ClientRecord>& clients,
                       std::span<const Objective> objectives,
                       const Hyper& hyper, const RoundKeys& keys,
                       int workers = 1);

// W rounds of synchronized skipping starting at round state.t (which must
// be a multiple of W): everybody trains once, then replays for W - 1 rounds.
// Returns the state after those W rounds.
GlobalState fedopt_sync_round(const GlobalState& state,
                              std::vector<ClientRecord>& clients,
                              std::span<const Objective> objectives,
                              const Hyper& hyper, const RoundKeys& keys,
                              int W);

// A complete run of one method: owns the global state and client records.
class Federation {
 public:
  Federation(std::vector<Objective> objectives, const BudgetAssignment& budgets,
             MethodSpec spec, Hyper hyper, ParamVec x0, int total_rounds,
             std::uint64_t seed, int workers = 1);

  RoundOutcome step();

  const GlobalState& state() const { return state_; }
  const std::vector<ClientRecord>& clients() const { return clients_; }
  const std::vector<Objective>& objectives() const { return objectives_; }
  const MethodSpec& spec() const { return spec_; }
  const Hyper& hyper() const { return hyper_; }
  std::uint64_t seed() const { return seed_; }
  long local_steps() const { return local_steps_; }

 private:
  std::vector<Objective> objectives_;
  MethodSpec spec_;
  Hyper hyper_;
  GlobalState state_;
  std::vector<ClientRecord> clients_;
  std::uint64_t seed_;
  int workers_;
  long local_steps_ = 0;
};

}  // namespace ccfl

#endif  // CCFL_PROTOCOL_H_
