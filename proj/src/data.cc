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

#include "ccfl/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ccfl/errors.h"
#include "ccfl/rng.h"

namespace ccfl {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

template <typename T>
void shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(v[i - 1], v[j]);
  }
}

Dataset take_rows(const Dataset& src, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.input_dim = src.input_dim;
  out.n_classes = src.n_classes;
  out.labels.reserve(rows.size());
  out.features.reserve(rows.size() * src.input_dim);
  for (std::size_t r : rows) {
    out.labels.push_back(src.labels[r]);
    out.features.insert(out.features.end(), src.row(r),
                        src.row(r) + src.input_dim);
  }
  return out;
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path, "read failed");
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                        const std::string& path) {
  if (off + 4 > b.size()) throw IoError(path, "truncated IDX header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

}  // namespace

Dataset generate_synthetic(std::size_t n_samples, std::size_t input_dim,
                           int n_classes, std::uint64_t seed) {
  if (n_samples == 0 || input_dim == 0) {
    throw InvalidArgument("generate_synthetic: sizes must be positive");
  }
  if (n_classes < 2) {
    throw InvalidArgument("generate_synthetic: n_classes must be >= 2");
  }
  RngStream rng = RngStream::For(seed, StreamPurpose::kData);
  std::vector<double> centers(static_cast<std::size_t>(n_classes) * input_dim);
  for (double& c : centers) c = rng.normal();

  std::vector<int> labels(n_samples);
  const std::size_t per = n_samples / n_classes;
  const std::size_t extra = n_samples % n_classes;
  std::size_t pos = 0;
  for (int c = 0; c < n_classes; ++c) {
    const std::size_t count = per + (static_cast<std::size_t>(c) < extra);
    std::fill_n(labels.begin() + pos, count, c);
    pos += count;
  }
  shuffle(labels, rng);

  Dataset out;
  out.input_dim = input_dim;
  out.n_classes = n_classes;
  out.labels = std::move(labels);
  out.features.resize(n_samples * input_dim);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double* center = centers.data() + out.labels[i] * input_dim;
    for (std::size_t j = 0; j < input_dim; ++j) {
      out.features[i * input_dim + j] = center[j] + 0.5 * rng.normal();
    }
  }
  return out;
}

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  const auto img = read_file(images_path);
  const auto lbl = read_file(labels_path);

  if (read_be32(img, 0, images_path) != kIdxImagesMagic) {
    throw IoError(images_path, "bad IDX magic (expected 0x00000803)");
  }
  if (read_be32(lbl, 0, labels_path) != kIdxLabelsMagic) {
    throw IoError(labels_path, "bad IDX magic (expected 0x00000801)");
  }
  const std::size_t n_images = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t n_labels = read_be32(lbl, 4, labels_path);
  if (n_images != n_labels) {
    throw IoError(images_path, "count mismatch: " + std::to_string(n_images) +
                                   " images vs " + std::to_string(n_labels) +
                                   " labels");
  }
  const std::size_t pixels = rows * cols;
  if (pixels == 0) throw IoError(images_path, "zero-sized images");
  if (img.size() < 16 + n_images * pixels) {
    throw IoError(images_path, "truncated pixel data");
  }
  if (lbl.size() < 8 + n_labels) {
    throw IoError(labels_path, "truncated label data");
  }

  Dataset out;
  out.input_dim = pixels;
  out.features.resize(n_images * pixels);
  for (std::size_t i = 0; i < n_images * pixels; ++i) {
    out.features[i] = static_cast<double>(img[16 + i]) / 255.0;
  }
  out.labels.resize(n_labels);
  int max_label = 0;
  for (std::size_t i = 0; i < n_labels; ++i) {
    out.labels[i] = lbl[8 + i];
    max_label = std::max(max_label, out.labels[i]);
  }
  out.n_classes = std::max(2, max_label + 1);
  return out;
}

TrainTestSplit stratified_split(const Dataset& data, double train_fraction,
                                std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw InvalidArgument("stratified_split: train_fraction must be in (0,1]");
  }
  RngStream rng = RngStream::For(seed, StreamPurpose::kSplit);
  std::vector<std::vector<std::size_t>> by_class(data.n_classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[data.labels[i]].push_back(i);
  }
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (auto& rows : by_class) {
    shuffle(rows, rng);
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(rows.size())));
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + n_train);
    test_rows.insert(test_rows.end(), rows.begin() + n_train, rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {take_rows(data, train_rows), take_rows(data, test_rows)};
}

std::vector<DataShard> partition(const Dataset& data,
                                 const PartitionPlan& plan) {
  if (!(plan.gamma >= 0.0 && plan.gamma <= 1.0)) {
    throw InvalidArgument("partition: gamma must be in [0, 1]");
  }
  if (plan.n_clients < 1) {
    throw InvalidArgument("partition: n_clients must be >= 1");
  }
  if (plan.classes_per_client < 1 ||
      plan.classes_per_client > data.n_classes) {
    throw InvalidArgument("partition: classes_per_client (" +
                          std::to_string(plan.classes_per_client) +
                          ") must be in [1, n_classes=" +
                          std::to_string(data.n_classes) + "]");
  }
  const std::size_t n = data.size();
  const auto n_clients = static_cast<std::size_t>(plan.n_clients);
  RngStream rng = RngStream::For(plan.seed, StreamPurpose::kPartition);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);

  const auto n_iid = static_cast<std::size_t>(
      std::llround(plan.gamma * static_cast<double>(n)));
  std::vector<std::vector<std::size_t>> assigned(n_clients);

  std::vector<std::size_t> skewed(perm.begin() + n_iid, perm.end());
  std::stable_sort(skewed.begin(), skewed.end(),
                   [&](std::size_t a, std::size_t b) {
                     return data.labels[a] < data.labels[b];
                   });
  const std::size_t n_blocks =
      n_clients * static_cast<std::size_t>(plan.classes_per_client);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t lo = b * skewed.size() / n_blocks;
    const std::size_t hi = (b + 1) * skewed.size() / n_blocks;
    auto& dst = assigned[b % n_clients];
    dst.insert(dst.end(), skewed.begin() + lo, skewed.begin() + hi);
  }

  for (std::size_t k = 0; k < n_iid; ++k) {
    assigned[k % n_clients].push_back(perm[k]);
  }

  std::vector<DataShard> shards(n_clients);
  for (std::size_t c = 0; c < n_clients; ++c) {
    if (assigned[c].empty()) {
      throw InvalidArgument("partition: client " + std::to_string(c) +
                            " received no samples");
    }
    shards[c].client_id = static_cast<int>(c);
    shards[c].data = take_rows(data, assigned[c]);
    shards[c].source_rows = std::move(assigned[c]);
  }
  return shards;
}

double BudgetAssignment::r() const {
  if (p.empty()) return 0.0;
  const auto constrained = std::count_if(p.begin(), p.end(),
                                         [](double v) { return v < 1.0; });
  return static_cast<double>(constrained) / static_cast<double>(p.size());
}

std::vector<int> BudgetAssignment::W() const {
  std::vector<int> w(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    w[i] = static_cast<int>(std::lround(1.0 / p[i]));
  }
  return w;
}

BudgetAssignment assign_budgets(int n_clients, int beta) {
  if (n_clients < 1) throw InvalidArgument("assign_budgets: N must be >= 1");
  if (beta < 1 || beta > n_clients) {
    throw InvalidArgument("assign_budgets: beta must be in [1, N]");
  }
  BudgetAssignment out;
  out.beta = beta;
  out.p.resize(n_clients);
  for (int i = 0; i < n_clients; ++i) {
    const int level = (beta * i) / n_clients;
    out.p[i] = std::ldexp(1.0, -level);
  }
  return out;
}

BudgetAssignment explicit_budgets(std::vector<double> p) {
  if (p.empty()) throw InvalidArgument("explicit_budgets: empty p list");
  for (double v : p) {
    if (!(v > 0.0 && v <= 1.0)) {
      throw InvalidArgument("explicit_budgets: every p_i must be in (0, 1]");
    }
  }
  BudgetAssignment out;
  out.p = std::move(p);
  return out;
}

BudgetAssignment two_group_budgets(int n_clients, double r, int W) {
  if (n_clients < 1) throw InvalidArgument("two_group_budgets: N must be >= 1");
  if (!(r >= 0.0 && r <= 1.0)) {
    throw InvalidArgument("two_group_budgets: r must be in [0, 1]");
  }
  if (W < 1) throw InvalidArgument("two_group_budgets: W must be >= 1");
  const auto constrained =
      static_cast<int>(std::lround(r * static_cast<double>(n_clients)));
  BudgetAssignment out;
  out.p.assign(n_clients, 1.0);
  for (int i = n_clients - constrained; i < n_clients; ++i) {
    out.p[i] = 1.0 / static_cast<double>(W);
  }
  return out;
}

}  // namespace ccfl
