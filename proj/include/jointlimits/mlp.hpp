#pragma once

#include "jointlimits/sampler.hpp"
#include "jointlimits/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace jointlimits {

enum class Activation { kTanh, kSigmoid, kIdentity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  MatX weights;  // out x in
  VecX bias;     // out
  Activation activation = Activation::kTanh;
};

/// Fully connected network whose scalar output is shifted by `output_shift`.
/// The joint-limit networks are [2n, 128, 128, 128, 1], tanh hidden layers,
/// sigmoid output and shift -0.5, so C(q) lies in (-0.5, 0.5).
struct MlpParams {
  std::vector<DenseLayer> layers;
  double output_shift = -0.5;

  int input_size() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols()); }
  std::vector<int> layer_sizes() const;
  void validate() const;
};

/// Layer sizes for a limb with n DOFs.
std::vector<int> limit_network_sizes(int n_dofs, int hidden = 128, int depth = 3);
/// All weights and biases zero.
MlpParams zero_network(const std::vector<int>& sizes);
/// Uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpParams glorot_network(const std::vector<int>& sizes, std::uint64_t seed);

double forward(const MlpParams& params, const VecX& features);
/// Pre-activation of the output layer (the logit of the sigmoid).
double output_logit(const MlpParams& params, const VecX& features);
/// d forward / d features, by reverse-mode differentiation.
VecX input_gradient(const MlpParams& params, const VecX& features);
/// d forward(featurize(q)) / dq.
VecX config_gradient(const MlpParams& params, const JointConfig& q);
/// Value and joint-space gradient in one pass.
double value_and_config_gradient(const MlpParams& params, const JointConfig& q, VecX& gradient);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::string loss = "bce";
  int hidden = 128;
  int depth = 3;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
};

struct TrainResult {
  MlpParams params;
  std::vector<EpochStats> curve;
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(int epoch)
      : std::runtime_error("training diverged: non-finite loss in epoch " + std::to_string(epoch)), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Minibatch Adam on binary cross-entropy of the sigmoid output. Accuracy in
/// the learning curve is measured on `held_out` when given, else on `train`.
TrainResult train(const Dataset& train, const TrainConfig& cfg, const Dataset* held_out = nullptr);

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
  double accuracy() const;
  /// fp / (fp + tn)
  double false_positive_rate() const;
  /// fn / (fn + tp)
  double false_negative_rate() const;
};

/// Predicted valid iff forward(...) > 0.
ConfusionMatrix evaluate(const MlpParams& params, const Dataset& test);

nlohmann::json to_json(const ConfusionMatrix& cm);

nlohmann::json to_json(const MlpParams& params);
MlpParams mlp_from_json(const nlohmann::json& j, const std::vector<int>& expected_sizes = {});
void save_weights(const MlpParams& params, const std::filesystem::path& path);
/// Throws ParseError on malformed files and ContractViolation when
/// `expected_sizes` is given and does not match the file.
MlpParams load_weights(const std::filesystem::path& path, const std::vector<int>& expected_sizes = {});

}  // namespace jointlimits
