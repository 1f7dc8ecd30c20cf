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

#ifndef CCFL_CONFIG_H_
#define CCFL_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccfl {

enum class TaskKind { kQuadratic, kSyntheticLogistic, kSyntheticMlp, kIdxMlp };

std::string to_string(TaskKind t);
TaskKind parse_task(std::string_view s);

// Complete description of one experiment. Stored on disk as flat
// `key = value` lines; see config_keys() for the accepted keys.
struct ExperimentConfig {
  TaskKind task = TaskKind::kSyntheticLogistic;
  int n_clients = 8;
  int rounds = 200;
  int local_steps = 10;
  double eta = 0.05;
  int batch_size = 32;
  double ratio = 1.0;
  std::optional<int> beta = 4;
  std::optional<std::vector<double>> p_list;
  double gamma = 0.5;
  int classes_per_client = 2;
  std::string schedule = "ad_hoc";
  std::vector<std::string> methods = {"fedavg_full", "cc_fedavg"};
  std::string variant = "client_backup";
  std::vector<int> backup_set;
  int tau = 100;
  std::optional<int> W_override;
  std::optional<double> r_override;
  std::uint64_t seed = 1;
  int seeds = 1;
  std::string out = "metrics.csv";

  // Synthetic classification data.
  int n_samples = 2000;
  int input_dim = 20;
  int n_classes = 4;
  int hidden_dim = 32;

  // Quadratic family.
  int quad_dim = 10;
  double noise_sigma = 0.1;
  double sigma_g = 1.0;
  double l_max = 1.0;

  // IDX files (idx-mlp). Without test files the training set is split 80/20.
  std::string idx_train_images;
  std::string idx_train_labels;
  std::string idx_test_images;
  std::string idx_test_labels;

  bool diagnostics = true;
  bool track_gradient = true;
  std::optional<int> probe_client;
  int workers = 1;

  friend bool operator==(const ExperimentConfig&,
                         const ExperimentConfig&) = default;
};

// Every key accepted by set_config_value, in serialization order.
const std::vector<std::string>& config_keys();

// Assigns one field from its text form. Setting `beta` clears `p_list` and
// vice versa. Throws ConfigError naming the field.
void set_config_value(ExperimentConfig& config, std::string_view key,
                      std::string_view value);

// Parses `key = value` lines; '#' starts a comment. Unknown keys, malformed
// values and files naming both beta and p_list are rejected. The result is
// validated.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

// Inverse of parse_config: parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

// Field-level validation; throws ConfigError on the first bad field.
void validate_config(const ExperimentConfig& config);

}  // namespace ccfl

#endif  // CCFL_CONFIG_H_
