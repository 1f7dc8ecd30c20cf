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

#ifndef CCFL_OBJECTIVE_H_
#define CCFL_OBJECTIVE_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ccfl/data.h"
#include "ccfl/param_vec.h"
#include "ccfl/rng.h"

namespace ccfl {

enum class ObjectiveKind { kQuadratic, kLogistic, kMlp };

// One realization of a minibatch gradient.
struct GradSample {
  ParamVec grad;
  double loss;
  std::vector<std::size_t> batch_ids;  // empty for quadratic
};

struct Evaluation {
  double loss;
  std::optional<double> accuracy;  // classification kinds only
};

class ObjectiveImpl;

// A client's local objective f_i. Read-only after construction and cheap to
// copy (shared immutable state), so gradient calls may run concurrently.
//
//   quadratic: f(x) = 1/2 (x - b)^T A (x - b), gradient A (x - b) plus
//              i.i.d. N(0, noise_sigma^2) per coordinate when stochastic.
//   logistic:  multinomial (softmax) linear model, weights then biases.
//   mlp:       input -> ReLU hidden -> softmax; layout W1, b1, W2, b2.
//
// Classifiers report mean cross-entropy over the shard; predictions break
// ties toward the lowest class index.
class Objective {
 public:
  // `a` is row-major d x d, symmetric PSD (checked). Throws InvalidArgument.
  static Objective Quadratic(std::vector<double> a, std::vector<double> b,
                             double noise_sigma);
  static Objective Logistic(std::shared_ptr<const Dataset> data);
  static Objective Mlp(std::shared_ptr<const Dataset> data,
                       std::size_t hidden_dim);

  ObjectiveKind kind() const;
  std::size_t dim() const;

  // Loss and exact gradient over the whole shard.
  ParamVec full_gradient(const ParamVec& x) const;

  // Unbiased minibatch gradient: batch rows drawn uniformly without
  // replacement. batch_size is clamped to the shard size. For the quadratic
  // kind the batch is ignored and Gaussian noise is added instead.
  GradSample stochastic_gradient(const ParamVec& x, std::size_t batch_size,
                                 RngStream& rng) const;

  Evaluation evaluate(const ParamVec& x) const;

  // Hot-path variants used by local training; `grad` must have dim() entries.
  double full_gradient_into(std::span<const double> x,
                            std::span<double> grad) const;
  double stochastic_gradient_into(std::span<const double> x,
                                  std::size_t batch_size, RngStream& rng,
                                  std::span<double> grad,
                                  std::vector<std::size_t>* batch_ids) const;

  // Starting parameters: zeros for logistic, fan-in-scaled uniform for mlp,
  // N(0, I) for quadratic.
  ParamVec initial_params(RngStream& rng) const;

  // E|g - grad f|^2 of the injected noise (d * noise_sigma^2); 0 for the
  // classifiers, whose noise comes from minibatching.
  double injected_noise_variance() const;

  // Quadratic accessors (empty for other kinds).
  std::span<const double> quadratic_a() const;
  std::span<const double> quadratic_b() const;
  double smoothness() const;  // largest eigenvalue of A (quadratic only)

  const Dataset* data() const;

 private:
  explicit Objective(std::shared_ptr<const ObjectiveImpl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<const ObjectiveImpl> impl_;
};

// Heterogeneous quadratic family: client i gets A_i = Q_i^T diag(lambda) Q_i
// with Q_i random orthogonal and lambda ~ U[0.1, l_max], and b_i ~
// N(0, sigma_g^2 I). Deterministic for a seed.
std::vector<Objective> make_quadratic_clients(int n_clients, std::size_t dim,
                                              double sigma_g, double l_max,
                                              double noise_sigma,
                                              std::uint64_t seed);

// argmin of (1/N) sum_i f_i for a quadratic family: (sum A_i)^-1 sum A_i b_i.
ParamVec quadratic_global_minimizer(std::span<const Objective> objectives);

}  // namespace ccfl

#endif  // CCFL_OBJECTIVE_H_
