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

#ifndef CCFL_RNG_H_
#define CCFL_RNG_H_

#include <cstdint>

namespace ccfl {

// What a stream is used for. Part of the stream key so that, e.g., the
// schedule coin of client i in round t never shares draws with its
// minibatch sampling in the same round.
enum class StreamPurpose : std::uint64_t {
  kSelection = 1,
  kSchedule = 2,
  kTrain = 3,
  kInit = 4,
  kData = 5,
  kPartition = 6,
  kQuadratic = 7,
  kSplit = 8,
};

// Counter-based generator: output n is a SplitMix64 finalizer applied to
// key + n * golden-gamma. Streams are plain values; copying one clones its
// future sequence exactly.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  // Stream keyed by (seed, purpose, a, b), e.g. (seed, kTrain, client, round).
  static RngStream For(std::uint64_t seed, StreamPurpose purpose,
                       std::uint64_t a = 0, std::uint64_t b = 0);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal (Box-Muller, second variate cached).
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace ccfl

#endif  // CCFL_RNG_H_
