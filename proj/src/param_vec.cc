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

#include "ccfl/param_vec.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccfl/errors.h"

namespace ccfl {
namespace {

void check_same_dim(const ParamVec& a, const ParamVec& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw DimensionError(std::string(op) + ": " + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()));
  }
}

}  // namespace

void check_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(what) + " at index " + std::to_string(i));
    }
  }
}

ParamVec::ParamVec(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgument("ParamVec must have dim >= 1");
  check_finite(values_, "ParamVec");
}

ParamVec ParamVec::Zeros(std::size_t dim) {
  return ParamVec(std::vector<double>(dim, 0.0));
}

ParamVec add(const ParamVec& a, const ParamVec& b) {
  check_same_dim(a, b, "add");
  std::vector<double> out(a.dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return ParamVec(std::move(out));
}

ParamVec sub(const ParamVec& a, const ParamVec& b) {
  check_same_dim(a, b, "sub");
  std::vector<double> out(a.dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return ParamVec(std::move(out));
}

ParamVec scale(const ParamVec& a, double c) {
  if (!std::isfinite(c)) throw NumericError("scale factor");
  std::vector<double> out(a.dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a[i];
  return ParamVec(std::move(out));
}

double dot(const ParamVec& a, const ParamVec& b) {
  check_same_dim(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  if (!std::isfinite(s)) throw NumericError("dot overflow");
  return s;
}

double norm_sq(const ParamVec& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  if (!std::isfinite(s)) throw NumericError("norm overflow");
  return s;
}

double l2_dist_sq(const ParamVec& a, const ParamVec& b) {
  check_same_dim(a, b, "l2_dist_sq");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  if (!std::isfinite(s)) throw NumericError("l2_dist_sq overflow");
  return s;
}

double cosine(const ParamVec& a, const ParamVec& b) {
  check_same_dim(a, b, "cosine");
  const double na = norm_sq(a);
  const double nb = norm_sq(b);
  if (na == 0.0 || nb == 0.0) {
    throw InvalidArgument("cosine: zero-norm input has no direction");
  }
  const double c = dot(a, b) / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace ccfl
