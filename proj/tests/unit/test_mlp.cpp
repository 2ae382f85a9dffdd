#include "jointlimits/mlp.hpp"

#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace jltest;

namespace {

// Scalar loops, no Eigen products.
double naive_forward(const MlpParams& p, const VecX& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  for (const auto& layer : p.layers) {
    std::vector<double> z(static_cast<std::size_t>(layer.weights.rows()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      double s = layer.bias[r];
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) s += layer.weights(r, c) * a[c];
      switch (layer.activation) {
        case Activation::kTanh: z[r] = std::tanh(s); break;
        case Activation::kSigmoid: z[r] = 1.0 / (1.0 + std::exp(-s)); break;
        case Activation::kIdentity: z[r] = s; break;
      }
    }
    a = z;
  }
  return a[0] + p.output_shift;
}

VecX random_vec(Rng& rng, int n, double scale) {
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

Dataset disc_dataset(int per_class, std::uint64_t seed) {
  Dataset d;
  d.limb = "toy";
  d.K = per_class;
  d.box = {{-kPi, kPi}, {-kPi, kPi}};
  d.buffers.resize(2);
  Rng rng(seed);
  while (d.buffers[0].size() < static_cast<std::size_t>(per_class) ||
         d.buffers[1].size() < static_cast<std::size_t>(per_class)) {
    JointConfig q(2);
    q << rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi);
    const int cat = q.norm() < 1.2 ? 0 : 1;
    auto& b = d.buffers[cat];
    if (b.size() < static_cast<std::size_t>(per_class)) b.push_back({featurize(q), cat == 0 ? 1 : 0, cat, q});
  }
  return d;
}

}  // namespace

TEST_CASE("layer sizes") {
  CHECK(limit_network_sizes(4) == std::vector<int>{8, 128, 128, 128, 1});
  CHECK(limit_network_sizes(6) == std::vector<int>{12, 128, 128, 128, 1});
  const MlpParams p = glorot_network(limit_network_sizes(4), 1);
  CHECK(p.layer_sizes() == std::vector<int>{8, 128, 128, 128, 1});
  CHECK(p.layers.back().activation == Activation::kSigmoid);
  for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) CHECK(p.layers[l].activation == Activation::kTanh);
  const double bound = std::sqrt(6.0 / (8 + 128));
  CHECK(p.layers[0].weights.cwiseAbs().maxCoeff() <= bound);
  CHECK(p.layers[0].bias.isZero());
}

TEST_CASE("forward matches a naive evaluator") {
  Rng rng(2);
  for (int n : {4, 6}) {
    const MlpParams p = random_net(limit_network_sizes(n), 30 + n);
    for (int k = 0; k < 200; ++k) {
      const VecX x = featurize(random_config(rng, n));
      CHECK(std::abs(forward(p, x) - naive_forward(p, x)) <= 1e-12);
    }
  }
}

TEST_CASE("zero network outputs zero and the output stays inside (-0.5, 0.5)") {
  const MlpParams z = zero_network(limit_network_sizes(4));
  CHECK(forward(z, featurize(JointConfig::Zero(4))) == 0.0);
  Rng rng(3);
  const MlpParams p = random_net(limit_network_sizes(4), 4);
  for (int k = 0; k < 500; ++k) {
    const double c = forward(p, featurize(random_config(rng, 4, -10, 10)));
    CHECK(c > -0.5);
    CHECK(c < 0.5);
  }
  // Saturated sigmoids may round onto the bounds but never past them.
  MlpParams big = p;
  for (auto& layer : big.layers) layer.weights *= 20.0;
  for (int k = 0; k < 500; ++k) {
    const double c = forward(big, featurize(random_config(rng, 4, -10, 10)));
    CHECK(c >= -0.5);
    CHECK(c <= 0.5);
  }
}

TEST_CASE("input and config gradients match finite differences") {
  Rng rng(5);
  for (int n : {4, 6}) {
    const MlpParams p = random_net(limit_network_sizes(n), 40 + n);
    for (int k = 0; k < 100; ++k) {
      const JointConfig q = random_config(rng, n);
      const VecX x = featurize(q);
      const VecX gx = input_gradient(p, x);
      const VecX fx = fd_gradient([&](const VecX& v) { return forward(p, v); }, x, 1e-5);
      const VecX gq = config_gradient(p, q);
      const VecX fq = fd_gradient([&](const VecX& v) { return forward(p, featurize(v)); }, q, 1e-5);
      for (Eigen::Index i = 0; i < gx.size(); ++i) {
        if (std::abs(fx[i]) > 1e-8) CHECK(rel_error(gx[i], fx[i]) <= 1e-5);
      }
      for (Eigen::Index i = 0; i < gq.size(); ++i) {
        if (std::abs(fq[i]) > 1e-8) CHECK(rel_error(gq[i], fq[i]) <= 1e-5);
      }
      VecX g;
      CHECK(value_and_config_gradient(p, q, g) == doctest::Approx(forward(p, x)).epsilon(1e-14));
      CHECK((g - gq).norm() <= 1e-14 * (1 + gq.norm()));
    }
  }
}

TEST_CASE("single sigmoid layer gradient in closed form") {
  const double limit = deg2rad(100.0), k = 8.0;
  const MlpParams p = single_dof_limit_net(4, 3, limit, k);
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const JointConfig q = random_config(rng, 4);
    const double s = 1.0 / (1.0 + std::exp(-k * (std::cos(q[3]) - std::cos(limit))));
    CHECK(forward(p, featurize(q)) == doctest::Approx(s - 0.5).epsilon(1e-13));
    const VecX g = config_gradient(p, q);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);
    CHECK(g[3] == doctest::Approx(-k * s * (1 - s) * std::sin(q[3])).epsilon(1e-12));
  }
}

TEST_CASE("C is 2 pi periodic in every coordinate") {
  const MlpParams p = random_net(limit_network_sizes(6), 7);
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    JointConfig q = random_config(rng, 6);
    const double c = forward(p, featurize(q));
    q[t % 6] += 2 * kPi * (1 + t % 3);
    CHECK(std::abs(forward(p, featurize(q)) - c) <= 1e-12);
  }
}

TEST_CASE("training separates a disc within 30 epochs and is deterministic") {
  const Dataset d = disc_dataset(1500, 9);
  const auto [tr, te] = split(d, 0.2, 1);
  TrainConfig cfg;
  cfg.hidden = 32;
  cfg.depth = 2;
  const TrainResult r = train(tr, cfg, &te);
  REQUIRE(r.curve.size() == 30);
  CHECK(r.curve.back().test_accuracy >= 0.98);
  CHECK(evaluate(r.params, te).accuracy() == doctest::Approx(r.curve.back().test_accuracy));
  CHECK(r.curve.back().train_loss < r.curve.front().train_loss);
  const TrainResult again = train(tr, cfg, &te);
  for (std::size_t l = 0; l < r.params.layers.size(); ++l) {
    CHECK(r.params.layers[l].weights == again.params.layers[l].weights);
    CHECK(r.params.layers[l].bias == again.params.layers[l].bias);
  }
}

TEST_CASE("training contract and divergence") {
  const Dataset d = disc_dataset(50, 10);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(d, cfg), ContractViolation);
  cfg = {};
  cfg.loss = "mse";
  CHECK_THROWS_AS(train(d, cfg), ContractViolation);
  Dataset corrupt = d;
  corrupt.buffers[1][7].features[2] = std::nan("");
  cfg = {};
  cfg.epochs = 3;
  cfg.hidden = 8;
  CHECK_THROWS_AS(train(corrupt, cfg), DivergenceError);
  CHECK_THROWS_AS(train(Dataset{}, TrainConfig{}), ContractViolation);
}

TEST_CASE("confusion matrix of a constant classifier") {
  MlpParams p = zero_network({8, 1});
  p.layers[0].activation = Activation::kSigmoid;
  p.layers[0].bias[0] = std::log(0.9 / 0.1);  // sigmoid = 0.9, output 0.4
  GenerateOptions opt;
  opt.K = 40;
  const Dataset d = generate(arm_model(), default_arm_validity(), opt);
  const ConfusionMatrix cm = evaluate(p, d);
  CHECK(cm.tp == 40);
  CHECK(cm.fp == 80);
  CHECK(cm.tn == 0);
  CHECK(cm.fn == 0);
  CHECK(cm.accuracy() == doctest::Approx(1.0 / 3.0));
  CHECK(cm.false_positive_rate() == 1.0);
  CHECK(cm.false_negative_rate() == 0.0);
  const auto j = to_json(cm);
  CHECK(j["total"] == 120);
}

TEST_CASE("weights files") {
  const MlpParams p = random_net(limit_network_sizes(4), 11);
  const auto path = std::filesystem::temp_directory_path() / "jointlimits_test_weights.json";
  save_weights(p, path);
  const MlpParams back = load_weights(path, limit_network_sizes(4));
  Rng rng(12);
  for (int k = 0; k < 50; ++k) {
    const VecX x = featurize(random_config(rng, 4));
    CHECK(forward(back, x) == forward(p, x));
  }
  CHECK_THROWS_AS(load_weights(path, limit_network_sizes(6)), ContractViolation);

  std::string text;
  {
    std::ifstream in(path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(path);
    out << text.substr(0, text.size() / 2);
  }
  CHECK_THROWS_AS(load_weights(path), ParseError);
  {
    std::ofstream out(path);
    out << "{\"format\": \"something-else\"}";
  }
  CHECK_THROWS_AS(load_weights(path), ParseError);
  std::filesystem::remove(path);
  CHECK_THROWS(load_weights(path));

  MlpParams bad = p;
  bad.layers[1].bias.resize(3);
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  CHECK_THROWS_AS(forward(p, VecX::Zero(6)), ContractViolation);
  CHECK(activation_from_string(to_string(Activation::kTanh)) == Activation::kTanh);
  CHECK_THROWS_AS(activation_from_string("relu"), ContractViolation);
}
