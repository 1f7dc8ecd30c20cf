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

#ifndef CCFL_PARAM_VEC_H_
#define CCFL_PARAM_VEC_H_

#include <cstddef>
#include <span>
#include <vector>

namespace ccfl {

// Flat, immutable parameter vector. Holds models, local updates and global
// updates alike. Construction rejects empty or non-finite input, so every
// live ParamVec has dim() >= 1 and finite entries.
class ParamVec {
 public:
  explicit ParamVec(std::vector<double> values);

  static ParamVec Zeros(std::size_t dim);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  // Bitwise-style equality: same dim and every entry compares equal.
  friend bool operator==(const ParamVec&, const ParamVec&) = default;

 private:
  std::vector<double> values_;
};

ParamVec add(const ParamVec& a, const ParamVec& b);
ParamVec sub(const ParamVec& a, const ParamVec& b);
ParamVec scale(const ParamVec& a, double c);

// All reductions accumulate left to right in index order.
double dot(const ParamVec& a, const ParamVec& b);
double norm_sq(const ParamVec& a);
double l2_dist_sq(const ParamVec& a, const ParamVec& b);

// <a,b> / (|a| |b|), clamped to [-1, 1]. Throws InvalidArgument when either
// input has zero norm (direction undefined).
double cosine(const ParamVec& a, const ParamVec& b);

// Throws NumericError naming `what` if any entry is NaN/Inf.
void check_finite(std::span<const double> values, const char* what);

}  // namespace ccfl

#endif  // CCFL_PARAM_VEC_H_
