#include "jointlimits/mlp.hpp"

#include "jointlimits/kinematics.hpp"
#include "jointlimits/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace jointlimits {

namespace {

constexpr int kWeightsVersion = 1;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <typename Derived>
void apply_activation(Activation a, Eigen::MatrixBase<Derived>& z) {
  switch (a) {
    case Activation::kTanh: z = z.array().tanh().matrix(); break;
    case Activation::kSigmoid: z = z.unaryExpr([](double v) { return sigmoid(v); }); break;
    case Activation::kIdentity: break;
  }
}

/// Derivative of the activation expressed through its output value.
template <typename Derived>
auto activation_slope(Activation a, const Eigen::ArrayBase<Derived>& out) {
  using Array = typename Derived::PlainObject;
  switch (a) {
    case Activation::kTanh: return Array(1.0 - out.square());
    case Activation::kSigmoid: return Array(out * (1.0 - out));
    case Activation::kIdentity: break;
  }
  return Array(Array::Ones(out.rows(), out.cols()));
}

struct Tape {
  std::vector<VecX> outputs;  // activation output per layer
};

double run_forward(const MlpParams& params, const VecX& features, Tape* tape, double* logit) {
  if (features.size() != params.input_size()) {
    throw ContractViolation("network expects " + std::to_string(params.input_size()) + " features, got " +
                            std::to_string(features.size()));
  }
  VecX x = features;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    VecX z = layer.weights * x + layer.bias;
    if (l + 1 == params.layers.size() && logit) *logit = z[0];
    apply_activation(layer.activation, z);
    if (tape) tape->outputs.push_back(z);
    x = std::move(z);
  }
  return x[0] + params.output_shift;
}

VecX run_backward(const MlpParams& params, const Tape& tape) {
  VecX upstream = VecX::Ones(1);
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    const VecX delta = (upstream.array() * activation_slope(layer.activation, tape.outputs[l].array())).matrix();
    upstream = layer.weights.transpose() * delta;
  }
  return upstream;
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "identity") return Activation::kIdentity;
  throw ContractViolation("unknown activation '" + s + "'");
}

std::vector<int> MlpParams::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(static_cast<int>(layers.front().weights.cols()));
  for (const auto& l : layers) sizes.push_back(static_cast<int>(l.weights.rows()));
  return sizes;
}

void MlpParams::validate() const {
  require(!layers.empty(), "network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    require(layer.bias.size() == layer.weights.rows(), "bias size does not match layer output");
    if (l > 0) require(layer.weights.cols() == layers[l - 1].weights.rows(), "layer dimensions do not chain");
    require(layer.weights.allFinite() && layer.bias.allFinite(), "network parameters must be finite");
  }
  require(layers.back().weights.rows() == 1, "network output must be scalar");
  require(std::isfinite(output_shift), "output shift must be finite");
}

std::vector<int> limit_network_sizes(int n_dofs, int hidden, int depth) {
  std::vector<int> sizes{2 * n_dofs};
  sizes.insert(sizes.end(), depth, hidden);
  sizes.push_back(1);
  return sizes;
}

MlpParams zero_network(const std::vector<int>& sizes) {
  require(sizes.size() >= 2, "a network needs at least an input and an output size");
  MlpParams p;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const bool last = l + 2 == sizes.size();
    p.layers.push_back({MatX::Zero(sizes[l + 1], sizes[l]), VecX::Zero(sizes[l + 1]),
                        last ? Activation::kSigmoid : Activation::kTanh});
  }
  return p;
}

MlpParams glorot_network(const std::vector<int>& sizes, std::uint64_t seed) {
  MlpParams p = zero_network(sizes);
  Rng rng(seed);
  for (auto& layer : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    // Fill row-major so the draw order matches the serialized layout.
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = rng.uniform(-limit, limit);
    }
  }
  return p;
}

double forward(const MlpParams& params, const VecX& features) {
  return run_forward(params, features, nullptr, nullptr);
}

double output_logit(const MlpParams& params, const VecX& features) {
  double logit = 0.0;
  run_forward(params, features, nullptr, &logit);
  return logit;
}

VecX input_gradient(const MlpParams& params, const VecX& features) {
  Tape tape;
  run_forward(params, features, &tape, nullptr);
  return run_backward(params, tape);
}

VecX config_gradient(const MlpParams& params, const JointConfig& q) {
  VecX g;
  value_and_config_gradient(params, q, g);
  return g;
}

double value_and_config_gradient(const MlpParams& params, const JointConfig& q, VecX& gradient) {
  const VecX x = featurize(q);
  Tape tape;
  const double value = run_forward(params, x, &tape, nullptr);
  const VecX gx = run_backward(params, tape);
  // Chain rule through [sin q, cos q]; feature_jacobian is diagonal by blocks.
  const auto n = q.size();
  gradient = gx.head(n).cwiseProduct(q.array().cos().matrix()) - gx.tail(n).cwiseProduct(q.array().sin().matrix());
  return value;
}

void TrainConfig::validate() const {
  require(epochs >= 1, "epochs must be at least 1");
  require(batch_size >= 1, "batch size must be at least 1");
  require(learning_rate > 0.0, "learning rate must be positive");
  require(loss == "bce", "only the 'bce' loss is supported");
  require(hidden >= 1 && depth >= 1, "network needs at least one hidden unit and layer");
}

TrainResult train(const Dataset& train_set, const TrainConfig& cfg, const Dataset* held_out) {
  cfg.validate();
  const auto samples = train_set.samples();
  require(!samples.empty(), "training set is empty");
  const int n_in = static_cast<int>(samples.front()->features.size());
  const auto n = static_cast<Eigen::Index>(samples.size());

  MatX X(n_in, n);
  VecX Y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X.col(i) = samples[i]->features;
    Y[i] = samples[i]->label;
  }

  TrainResult result;
  result.params = glorot_network(limit_network_sizes(n_in / 2, cfg.hidden, cfg.depth), cfg.seed);
  auto& layers = result.params.layers;
  const std::size_t L = layers.size();

  std::vector<MatX> mW(L), vW(L), gW(L);
  std::vector<VecX> mb(L), vb(L), gb(L);
  for (std::size_t l = 0; l < L; ++l) {
    mW[l] = vW[l] = MatX::Zero(layers[l].weights.rows(), layers[l].weights.cols());
    mb[l] = vb[l] = VecX::Zero(layers[l].bias.size());
  }

  Rng rng(derive_seed(cfg.seed, 1));
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;

  std::vector<MatX> acts(L);
  MatX xb;
  VecX yb;
  std::int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index B = std::min<Eigen::Index>(cfg.batch_size, n - start);
      xb.resize(n_in, B);
      yb.resize(B);
      for (Eigen::Index i = 0; i < B; ++i) {
        xb.col(i) = X.col(order[start + i]);
        yb[i] = Y[order[start + i]];
      }

      // Forward; the last layer keeps the logit.
      for (std::size_t l = 0; l < L; ++l) {
        const MatX& in = l == 0 ? xb : acts[l - 1];
        acts[l].noalias() = layers[l].weights * in;
        acts[l].colwise() += layers[l].bias;
        if (l + 1 < L) acts[l] = acts[l].array().tanh();
      }
      const auto logits = acts[L - 1].row(0).transpose();

      // Stable BCE with logits: max(z,0) - z*y + log(1 + exp(-|z|)).
      double batch_loss = 0.0;
      MatX delta(1, B);
      for (Eigen::Index i = 0; i < B; ++i) {
        const double z = logits[i];
        batch_loss += std::max(z, 0.0) - z * yb[i] + std::log1p(std::exp(-std::abs(z)));
        delta(0, i) = (sigmoid(z) - yb[i]) / static_cast<double>(B);
      }
      if (!std::isfinite(batch_loss)) throw DivergenceError(epoch);
      loss_sum += batch_loss;

      for (std::size_t l = L; l-- > 0;) {
        const MatX& in = l == 0 ? xb : acts[l - 1];
        gW[l].noalias() = delta * in.transpose();
        gb[l] = delta.rowwise().sum();
        if (l > 0) {
          MatX up = layers[l].weights.transpose() * delta;
          delta = up.array() * (1.0 - acts[l - 1].array().square());
        }
      }

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      const double lr = cfg.learning_rate * std::sqrt(c2) / c1;
      const double eps_hat = cfg.epsilon * std::sqrt(c2);
      for (std::size_t l = 0; l < L; ++l) {
        mW[l] = cfg.beta1 * mW[l] + (1.0 - cfg.beta1) * gW[l];
        vW[l] = cfg.beta2 * vW[l] + (1.0 - cfg.beta2) * gW[l].cwiseAbs2();
        layers[l].weights.array() -= lr * mW[l].array() / (vW[l].array().sqrt() + eps_hat);
        mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * gb[l];
        vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * gb[l].cwiseAbs2();
        layers[l].bias.array() -= lr * mb[l].array() / (vb[l].array().sqrt() + eps_hat);
      }
    }
    const double mean_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(mean_loss) || !layers.back().weights.allFinite()) throw DivergenceError(epoch);
    const ConfusionMatrix cm = evaluate(result.params, held_out ? *held_out : train_set);
    result.curve.push_back({epoch, mean_loss, cm.accuracy()});
  }
  return result;
}

double ConfusionMatrix::accuracy() const {
  return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
}

double ConfusionMatrix::false_positive_rate() const {
  return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(fp + tn);
}

double ConfusionMatrix::false_negative_rate() const {
  return fn + tp == 0 ? 0.0 : static_cast<double>(fn) / static_cast<double>(fn + tp);
}

ConfusionMatrix evaluate(const MlpParams& params, const Dataset& test) {
  ConfusionMatrix cm;
  for (const auto& buffer : test.buffers) {
    for (const auto& s : buffer) {
      const bool predicted = forward(params, s.features) > 0.0;
      const bool actual = s.label == 1;
      if (predicted && actual) ++cm.tp;
      else if (predicted) ++cm.fp;
      else if (actual) ++cm.fn;
      else ++cm.tn;
    }
  }
  return cm;
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp},
          {"tn", cm.tn},
          {"fp", cm.fp},
          {"fn", cm.fn},
          {"total", cm.total()},
          {"accuracy", cm.accuracy()},
          {"false_positive_rate", cm.false_positive_rate()},
          {"false_negative_rate", cm.false_negative_rate()}};
}

nlohmann::json to_json(const MlpParams& params) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    }
    layers.push_back({{"rows", l.weights.rows()},
                      {"cols", l.weights.cols()},
                      {"activation", to_string(l.activation)},
                      {"weights", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"format", "jointlimits-mlp"},
          {"version", kWeightsVersion},
          {"layer_sizes", params.layer_sizes()},
          {"output_shift", params.output_shift},
          {"layers", layers}};
}

MlpParams mlp_from_json(const nlohmann::json& j, const std::vector<int>& expected_sizes) {
  if (j.value("format", "") != "jointlimits-mlp") throw ParseError("weights: not a weights file", 0);
  if (j.value("version", -1) != kWeightsVersion) throw UnsupportedVersion("weights: unsupported version");
  const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
  if (!expected_sizes.empty() && sizes != expected_sizes) {
    std::ostringstream msg;
    msg << "weights: layer sizes [";
    for (std::size_t i = 0; i < sizes.size(); ++i) msg << (i ? "," : "") << sizes[i];
    msg << "] do not match the expected [";
    for (std::size_t i = 0; i < expected_sizes.size(); ++i) msg << (i ? "," : "") << expected_sizes[i];
    msg << "]";
    throw ContractViolation(msg.str());
  }
  MlpParams p;
  p.output_shift = j.at("output_shift").get<double>();
  const auto& layers = j.at("layers");
  if (layers.size() + 1 != sizes.size()) throw ContractViolation("weights: layer count does not match layer_sizes");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& jl = layers[l];
    const auto rows = jl.at("rows").get<Eigen::Index>();
    const auto cols = jl.at("cols").get<Eigen::Index>();
    if (rows != sizes[l + 1] || cols != sizes[l]) {
      throw ContractViolation("weights: layer " + std::to_string(l) + " dimensions disagree with layer_sizes");
    }
    const auto w = jl.at("weights").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
      throw ContractViolation("weights: layer " + std::to_string(l) + " array sizes disagree with its header");
    }
    DenseLayer layer;
    layer.activation = activation_from_string(jl.at("activation").get<std::string>());
    layer.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data(), rows, cols);
    layer.bias = Eigen::Map<const VecX>(b.data(), rows);
    p.layers.push_back(std::move(layer));
  }
  p.validate();
  return p;
}

void save_weights(const MlpParams& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  // nlohmann::json emits shortest round-trip representations of doubles.
  out << to_json(params).dump() << "\n";
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

MlpParams load_weights(const std::filesystem::path& path, const std::vector<int>& expected_sizes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("weights: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("weights: ") + e.what(), 0);
  }
  try {
    return mlp_from_json(j, expected_sizes);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("weights: ") + e.what(), 0);
  }
}

}  // namespace jointlimits
