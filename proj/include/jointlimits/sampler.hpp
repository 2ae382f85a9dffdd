#pragma once

#include "jointlimits/kinematics.hpp"
#include "jointlimits/oracle.hpp"
#include "jointlimits/types.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace jointlimits {

struct Sample {
  VecX features;  // featurize(q_raw)
  int label = 0;  // 1 iff category == 0
  int category = 0;
  JointConfig q_raw;
};

/// Category-balanced training data: buffers[i] holds only category-i samples.
struct Dataset {
  std::string limb;
  int K = 0;
  std::uint64_t seed = 0;
  std::vector<Interval> box;  // sampling range per DOF
  std::vector<std::vector<Sample>> buffers;

  int n_dofs() const { return static_cast<int>(box.size()); }
  std::size_t size() const;
  /// All samples, buffer by buffer.
  std::vector<const Sample*> samples() const;
};

/// Raised when a category never fills within the draw cap.
class StarvedBufferError : public std::runtime_error {
 public:
  StarvedBufferError(int buffer, std::uint64_t draws, std::size_t filled, int K)
      : std::runtime_error("buffer D" + std::to_string(buffer) + " starved: " + std::to_string(filled) + "/" +
                           std::to_string(K) + " samples after " + std::to_string(draws) + " draws"),
        buffer_(buffer) {}
  int buffer() const { return buffer_; }

 private:
  int buffer_;
};

struct GenerateOptions {
  int K = 25000;
  std::uint64_t seed = 7;
  std::vector<Interval> box;  // empty: default_sampling_box(model)
  std::uint64_t max_draws = 100'000'000;
  int workers = 1;
  /// Draws per worker between merges.
  int chunk = 4096;
};

struct GenerateStats {
  std::uint64_t draws = 0;
  std::vector<std::uint64_t> category_hits;  // raw counts before truncation

  double valid_fraction() const;
};

/// Each DOF samples its box limits when declared, [-pi, pi) otherwise.
std::vector<Interval> default_sampling_box(const LimbModel& model);

/// Rejection-balanced generation: draw uniformly, label with the oracle,
/// buffer by category until every buffer holds K samples, keep the first K.
Dataset generate(const LimbModel& model, const ValidityModel& vm, const GenerateOptions& options,
                 GenerateStats* stats = nullptr);

/// Labels a single configuration exactly as generate() would.
Sample make_sample(const LimbModel& model, const ValidityModel& vm, const JointConfig& q);

/// Stratified per-buffer split into (train, test).
std::pair<Dataset, Dataset> split(const Dataset& d, double test_fraction, std::uint64_t seed);

// File: one JSON header line followed by one CSV row per sample:
//   category,label,q_1..q_n,feature_1..feature_2n
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
std::string dataset_to_string(const Dataset& d);
Dataset dataset_from_string(const std::string& text);

}  // namespace jointlimits
