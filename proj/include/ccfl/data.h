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

#ifndef CCFL_DATA_H_
#define CCFL_DATA_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ccfl {

// Labelled feature matrix, row-major (size() x input_dim).
struct Dataset {
  std::vector<double> features;
  std::vector<int> labels;
  std::size_t input_dim = 0;
  int n_classes = 0;

  std::size_t size() const { return labels.size(); }
  const double* row(std::size_t i) const {
    return features.data() + i * input_dim;
  }
};

// One client's local data. `source_rows` are the row indices of the parent
// dataset that were dealt to this client.
struct DataShard {
  int client_id = 0;
  Dataset data;
  std::vector<std::size_t> source_rows;

  std::size_t size() const { return data.size(); }
};

// Gaussian class clusters: each class center ~ N(0, I), samples
// ~ N(center, 0.5^2 I). Classes receive floor/ceil(n_samples / n_classes)
// rows each; the row order is shuffled. Deterministic for a seed.
Dataset generate_synthetic(std::size_t n_samples, std::size_t input_dim,
                           int n_classes, std::uint64_t seed);

// Reads an IDX3 image file (magic 0x00000803) and an IDX1 label file
// (magic 0x00000801). Pixels are scaled by 1/255 and each image is flattened
// row-major. Throws IoError on open/read failures, bad magic, truncation or
// count mismatch.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Per-class split: floor(train_fraction * class_count) rows of every class go
// to train, the rest to test. Within-class order is seeded-shuffled first.
TrainTestSplit stratified_split(const Dataset& data, double train_fraction,
                                std::uint64_t seed);

struct PartitionPlan {
  double gamma = 0.0;  // IID proportion; 0 = fully label-skewed, 1 = IID.
  int n_clients = 1;
  int classes_per_client = 2;
  std::uint64_t seed = 0;
};

// gamma-mixed label-skew partition.
//
// A seeded permutation splits the rows into an IID pool (the first
// round(gamma * n) rows) and a skewed pool (the rest). The skewed pool is
// sorted by label (ties in permutation order), cut into
// n_clients * classes_per_client contiguous near-equal blocks, and client j
// receives blocks j, j + N, j + 2N, ...; so low labels land on low client
// ids. The IID pool is dealt round-robin. Shards are disjoint and cover the
// input. Throws InvalidArgument if classes_per_client > n_classes or a
// client would end up empty.
std::vector<DataShard> partition(const Dataset& data, const PartitionPlan& plan);

// Computation budgets p_i in (0, 1], one per client.
struct BudgetAssignment {
  std::vector<double> p;
  std::optional<int> beta;

  // Fraction of clients with p_i < 1.
  double r() const;
  // round(1 / p_i) per client: the train-once-every-W period.
  std::vector<int> W() const;
};

// p_i = (1/2)^floor(beta * i / N) for i = 0..N-1. Requires 1 <= beta <= N.
BudgetAssignment assign_budgets(int n_clients, int beta);

// Caller-supplied budgets; each must lie in (0, 1].
BudgetAssignment explicit_budgets(std::vector<double> p);

// Two resource groups: the last round(r * N) clients get p = 1/W, the rest 1.
BudgetAssignment two_group_budgets(int n_clients, double r, int W);

}  // namespace ccfl

#endif  // CCFL_DATA_H_
