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

#include "ccfl/objective.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ccfl/errors.h"

namespace ccfl {

class ObjectiveImpl {
 public:
  virtual ~ObjectiveImpl() = default;
  virtual ObjectiveKind kind() const = 0;
  virtual std::size_t dim() const = 0;
  // Mean loss and gradient over `rows` (nullptr = every row).
  virtual double loss_grad(std::span<const double> x,
                           const std::vector<std::size_t>* rows,
                           std::span<double> grad) const = 0;
  virtual Evaluation evaluate(std::span<const double> x) const = 0;
  virtual ParamVec initial_params(RngStream& rng) const = 0;
  virtual const Dataset* data() const { return nullptr; }
};

namespace {

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": got " + std::to_string(got) +
                         ", objective dim " + std::to_string(want));
  }
}

// Softmax cross-entropy for one sample. Writes p - onehot(label) into `dz`
// and returns -log p[label].
double softmax_xent(std::span<const double> logits, int label,
                    std::span<double> dz) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    dz[c] = std::exp(logits[c] - mx);
    denom += dz[c];
  }
  for (std::size_t c = 0; c < logits.size(); ++c) dz[c] /= denom;
  const double loss = -(logits[label] - mx - std::log(denom));
  dz[label] -= 1.0;
  return loss;
}

int argmax_lowest(std::span<const double> logits) {
  int best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = static_cast<int>(c);
  }
  return best;
}

double logsumexp_loss(std::span<const double> logits, int label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double z : logits) denom += std::exp(z - mx);
  return -(logits[label] - mx - std::log(denom));
}

class QuadraticImpl final : public ObjectiveImpl {
 public:
  QuadraticImpl(std::vector<double> a, std::vector<double> b, double sigma)
      : a_(std::move(a)), b_(std::move(b)), noise_sigma_(sigma) {
    const std::size_t d = b_.size();
    if (d == 0) throw InvalidArgument("quadratic: empty b");
    if (a_.size() != d * d) throw DimensionError("quadratic: A must be d x d");
    if (!(noise_sigma_ >= 0.0) || !std::isfinite(noise_sigma_)) {
      throw InvalidArgument("quadratic: noise_sigma must be finite and >= 0");
    }
    check_finite(a_, "quadratic A");
    check_finite(b_, "quadratic b");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        m(a_.data(), d, d);
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    const double mag = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (asym > 1e-12 * mag) throw InvalidArgument("quadratic: A not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    const double lo = eig.eigenvalues().minCoeff();
    if (lo < -1e-10 * mag) {
      throw InvalidArgument("quadratic: A not positive semidefinite");
    }
    smoothness_ = eig.eigenvalues().maxCoeff();
  }

  ObjectiveKind kind() const override { return ObjectiveKind::kQuadratic; }
  std::size_t dim() const override { return b_.size(); }

  double loss_grad(std::span<const double> x, const std::vector<std::size_t>*,
                   std::span<double> grad) const override {
    const std::size_t d = b_.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += a_[i * d + j] * (x[j] - b_[j]);
      grad[i] = s;
      loss += 0.5 * (x[i] - b_[i]) * s;
    }
    return loss;
  }

  Evaluation evaluate(std::span<const double> x) const override {
    std::vector<double> g(dim());
    return {loss_grad(x, nullptr, g), std::nullopt};
  }

  ParamVec initial_params(RngStream& rng) const override {
    std::vector<double> x(dim());
    for (double& v : x) v = rng.normal();
    return ParamVec(std::move(x));
  }

  const std::vector<double>& a() const { return a_; }
  const std::vector<double>& b() const { return b_; }
  double noise_sigma() const { return noise_sigma_; }
  double smoothness() const { return smoothness_; }

 private:
  std::vector<double> a_;
  std::vector<double> b_;
  double noise_sigma_;
  double smoothness_ = 0.0;
};

class LogisticImpl final : public ObjectiveImpl {
 public:
  explicit LogisticImpl(std::shared_ptr<const Dataset> data)
      : data_(std::move(data)) {
    if (!data_ || data_->size() == 0) {
      throw InvalidArgument("logistic: empty shard");
    }
    classes_ = static_cast<std::size_t>(data_->n_classes);
    in_ = data_->input_dim;
  }

  ObjectiveKind kind() const override { return ObjectiveKind::kLogistic; }
  std::size_t dim() const override { return classes_ * in_ + classes_; }
  const Dataset* data() const override { return data_.get(); }

  double loss_grad(std::span<const double> x,
                   const std::vector<std::size_t>* rows,
                   std::span<double> grad) const override {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> logits(classes_);
    std::vector<double> dz(classes_);
    const std::size_t n = rows ? rows->size() : data_->size();
    double loss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t r = rows ? (*rows)[k] : k;
      const double* f = data_->row(r);
      forward(x, f, logits);
      loss += softmax_xent(logits, data_->labels[r], dz);
      for (std::size_t c = 0; c < classes_; ++c) {
        double* gw = grad.data() + c * in_;
        for (std::size_t j = 0; j < in_; ++j) gw[j] += dz[c] * f[j];
        grad[classes_ * in_ + c] += dz[c];
      }
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (double& g : grad) g *= inv;
    return loss * inv;
  }

  Evaluation evaluate(std::span<const double> x) const override {
    std::vector<double> logits(classes_);
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data_->size(); ++r) {
      forward(x, data_->row(r), logits);
      loss += logsumexp_loss(logits, data_->labels[r]);
      correct += argmax_lowest(logits) == data_->labels[r];
    }
    const double n = static_cast<double>(data_->size());
    return {loss / n, static_cast<double>(correct) / n};
  }

  ParamVec initial_params(RngStream&) const override {
    return ParamVec::Zeros(dim());
  }

 private:
  void forward(std::span<const double> x, const double* f,
               std::span<double> logits) const {
    for (std::size_t c = 0; c < classes_; ++c) {
      const double* w = x.data() + c * in_;
      double z = x[classes_ * in_ + c];
      for (std::size_t j = 0; j < in_; ++j) z += w[j] * f[j];
      logits[c] = z;
    }
  }

  std::shared_ptr<const Dataset> data_;
  std::size_t classes_ = 0;
  std::size_t in_ = 0;
};

class MlpImpl final : public ObjectiveImpl {
 public:
  MlpImpl(std::shared_ptr<const Dataset> data, std::size_t hidden)
      : data_(std::move(data)), hidden_(hidden) {
    if (!data_ || data_->size() == 0) throw InvalidArgument("mlp: empty shard");
    if (hidden_ == 0) throw InvalidArgument("mlp: hidden_dim must be >= 1");
    in_ = data_->input_dim;
    classes_ = static_cast<std::size_t>(data_->n_classes);
    off_b1_ = hidden_ * in_;
    off_w2_ = off_b1_ + hidden_;
    off_b2_ = off_w2_ + classes_ * hidden_;
  }

  ObjectiveKind kind() const override { return ObjectiveKind::kMlp; }
  std::size_t dim() const override { return off_b2_ + classes_; }
  const Dataset* data() const override { return data_.get(); }

  double loss_grad(std::span<const double> x,
                   const std::vector<std::size_t>* rows,
                   std::span<double> grad) const override {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> pre(hidden_), act(hidden_), logits(classes_),
        dz(classes_), dh(hidden_);
    const std::size_t n = rows ? rows->size() : data_->size();
    double loss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t r = rows ? (*rows)[k] : k;
      const double* f = data_->row(r);
      forward(x, f, pre, act, logits);
      loss += softmax_xent(logits, data_->labels[r], dz);
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t c = 0; c < classes_; ++c) {
        const double* w2 = x.data() + off_w2_ + c * hidden_;
        double* gw2 = grad.data() + off_w2_ + c * hidden_;
        for (std::size_t h = 0; h < hidden_; ++h) {
          gw2[h] += dz[c] * act[h];
          dh[h] += w2[h] * dz[c];
        }
        grad[off_b2_ + c] += dz[c];
      }
      for (std::size_t h = 0; h < hidden_; ++h) {
        if (pre[h] <= 0.0) continue;
        double* gw1 = grad.data() + h * in_;
        for (std::size_t j = 0; j < in_; ++j) gw1[j] += dh[h] * f[j];
        grad[off_b1_ + h] += dh[h];
      }
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (double& g : grad) g *= inv;
    return loss * inv;
  }

  Evaluation evaluate(std::span<const double> x) const override {
    std::vector<double> pre(hidden_), act(hidden_), logits(classes_);
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data_->size(); ++r) {
      forward(x, data_->row(r), pre, act, logits);
      loss += logsumexp_loss(logits, data_->labels[r]);
      correct += argmax_lowest(logits) == data_->labels[r];
    }
    const double n = static_cast<double>(data_->size());
    return {loss / n, static_cast<double>(correct) / n};
  }

  ParamVec initial_params(RngStream& rng) const override {
    std::vector<double> x(dim());
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (std::size_t i = 0; i < off_w2_; ++i) {
      x[i] = s1 * (2.0 * rng.uniform() - 1.0);
    }
    for (std::size_t i = off_w2_; i < x.size(); ++i) {
      x[i] = s2 * (2.0 * rng.uniform() - 1.0);
    }
    return ParamVec(std::move(x));
  }

 private:
  void forward(std::span<const double> x, const double* f,
               std::span<double> pre, std::span<double> act,
               std::span<double> logits) const {
    for (std::size_t h = 0; h < hidden_; ++h) {
      const double* w1 = x.data() + h * in_;
      double z = x[off_b1_ + h];
      for (std::size_t j = 0; j < in_; ++j) z += w1[j] * f[j];
      pre[h] = z;
      act[h] = z > 0.0 ? z : 0.0;
    }
    for (std::size_t c = 0; c < classes_; ++c) {
      const double* w2 = x.data() + off_w2_ + c * hidden_;
      double z = x[off_b2_ + c];
      for (std::size_t h = 0; h < hidden_; ++h) z += w2[h] * act[h];
      logits[c] = z;
    }
  }

  std::shared_ptr<const Dataset> data_;
  std::size_t hidden_;
  std::size_t in_ = 0;
  std::size_t classes_ = 0;
  std::size_t off_b1_ = 0, off_w2_ = 0, off_b2_ = 0;
};

// Partial Fisher-Yates: the first `k` entries of a shuffled 0..n-1.
std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                    std::size_t k,
                                                    RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k >= n) return idx;  // full batch, natural order
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_int(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

const QuadraticImpl* as_quadratic(const ObjectiveImpl* impl) {
  return impl->kind() == ObjectiveKind::kQuadratic
             ? static_cast<const QuadraticImpl*>(impl)
             : nullptr;
}

}  // namespace

Objective Objective::Quadratic(std::vector<double> a, std::vector<double> b,
                               double noise_sigma) {
  return Objective(
      std::make_shared<QuadraticImpl>(std::move(a), std::move(b), noise_sigma));
}

Objective Objective::Logistic(std::shared_ptr<const Dataset> data) {
  return Objective(std::make_shared<LogisticImpl>(std::move(data)));
}

Objective Objective::Mlp(std::shared_ptr<const Dataset> data,
                         std::size_t hidden_dim) {
  return Objective(std::make_shared<MlpImpl>(std::move(data), hidden_dim));
}

ObjectiveKind Objective::kind() const { return impl_->kind(); }
std::size_t Objective::dim() const { return impl_->dim(); }
const Dataset* Objective::data() const { return impl_->data(); }

double Objective::full_gradient_into(std::span<const double> x,
                                     std::span<double> grad) const {
  check_dim(x.size(), dim(), "full_gradient");
  return impl_->loss_grad(x, nullptr, grad);
}

ParamVec Objective::full_gradient(const ParamVec& x) const {
  std::vector<double> g(dim());
  full_gradient_into(x.values(), g);
  return ParamVec(std::move(g));
}

double Objective::stochastic_gradient_into(
    std::span<const double> x, std::size_t batch_size, RngStream& rng,
    std::span<double> grad, std::vector<std::size_t>* batch_ids) const {
  check_dim(x.size(), dim(), "stochastic_gradient");
  if (const auto* q = as_quadratic(impl_.get())) {
    const double loss = q->loss_grad(x, nullptr, grad);
    if (q->noise_sigma() > 0.0) {
      for (double& g : grad) g += q->noise_sigma() * rng.normal();
    }
    if (batch_ids) batch_ids->clear();
    return loss;
  }
  const std::size_t n = impl_->data()->size();
  if (batch_size == 0) {
    throw InvalidArgument("stochastic_gradient: batch_size must be >= 1");
  }
  const std::size_t k = std::min(batch_size, n);
  auto rows = sample_without_replacement(n, k, rng);
  const double loss = impl_->loss_grad(x, &rows, grad);
  if (batch_ids) *batch_ids = std::move(rows);
  return loss;
}

GradSample Objective::stochastic_gradient(const ParamVec& x,
                                          std::size_t batch_size,
                                          RngStream& rng) const {
  std::vector<double> g(dim());
  std::vector<std::size_t> ids;
  const double loss =
      stochastic_gradient_into(x.values(), batch_size, rng, g, &ids);
  return {ParamVec(std::move(g)), loss, std::move(ids)};
}

Evaluation Objective::evaluate(const ParamVec& x) const {
  check_dim(x.dim(), dim(), "evaluate");
  return impl_->evaluate(x.values());
}

ParamVec Objective::initial_params(RngStream& rng) const {
  return impl_->initial_params(rng);
}

double Objective::injected_noise_variance() const {
  if (const auto* q = as_quadratic(impl_.get())) {
    return static_cast<double>(q->b().size()) * q->noise_sigma() *
           q->noise_sigma();
  }
  return 0.0;
}

std::span<const double> Objective::quadratic_a() const {
  if (const auto* q = as_quadratic(impl_.get())) return q->a();
  return {};
}

std::span<const double> Objective::quadratic_b() const {
  if (const auto* q = as_quadratic(impl_.get())) return q->b();
  return {};
}

double Objective::smoothness() const {
  if (const auto* q = as_quadratic(impl_.get())) return q->smoothness();
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<Objective> make_quadratic_clients(int n_clients, std::size_t dim,
                                              double sigma_g, double l_max,
                                              double noise_sigma,
                                              std::uint64_t seed) {
  if (n_clients < 1 || dim == 0) {
    throw InvalidArgument("make_quadratic_clients: sizes must be positive");
  }
  if (!(l_max >= 0.1)) {
    throw InvalidArgument("make_quadratic_clients: l_max must be >= 0.1");
  }
  std::vector<Objective> out;
  out.reserve(n_clients);
  const auto d = static_cast<Eigen::Index>(dim);
  for (int i = 0; i < n_clients; ++i) {
    RngStream rng = RngStream::For(seed, StreamPurpose::kQuadratic,
                                   static_cast<std::uint64_t>(i));
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) g(r, c) = rng.normal();
    }
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    Eigen::VectorXd lambda(d);
    for (Eigen::Index k = 0; k < d; ++k) {
      lambda(k) = 0.1 + (l_max - 0.1) * rng.uniform();
    }
    Eigen::MatrixXd a = q.transpose() * lambda.asDiagonal() * q;
    a = 0.5 * (a + a.transpose());
    std::vector<double> a_flat(dim * dim);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) a_flat[r * d + c] = a(r, c);
    }
    std::vector<double> b(dim);
    for (double& v : b) v = sigma_g * rng.normal();
    out.push_back(
        Objective::Quadratic(std::move(a_flat), std::move(b), noise_sigma));
  }
  return out;
}

ParamVec quadratic_global_minimizer(std::span<const Objective> objectives) {
  if (objectives.empty()) throw InvalidArgument("no objectives");
  const std::size_t dim = objectives.front().dim();
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd sum_a = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd sum_ab = Eigen::VectorXd::Zero(d);
  for (const Objective& obj : objectives) {
    if (obj.kind() != ObjectiveKind::kQuadratic || obj.dim() != dim) {
      throw InvalidArgument("quadratic_global_minimizer: mixed objectives");
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        a(obj.quadratic_a().data(), d, d);
    Eigen::Map<const Eigen::VectorXd> b(obj.quadratic_b().data(), d);
    sum_a += a;
    sum_ab += a * b;
  }
  const Eigen::VectorXd x = sum_a.ldlt().solve(sum_ab);
  return ParamVec(std::vector<double>(x.data(), x.data() + d));
}

}  // namespace ccfl
