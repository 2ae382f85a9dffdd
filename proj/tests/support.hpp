#pragma once

#include "jointlimits/kinematics.hpp"
#include "jointlimits/mlp.hpp"
#include "jointlimits/random.hpp"

#include <cmath>
#include <functional>

namespace jltest {

using namespace jointlimits;

inline JointConfig random_config(Rng& rng, int n, double lo = -kPi, double hi = kPi) {
  JointConfig q(n);
  for (int i = 0; i < n; ++i) q[i] = rng.uniform(lo, hi);
  return q;
}

/// Central differences of a scalar function.
inline VecX fd_gradient(const std::function<double(const VecX&)>& f, const VecX& x, double h) {
  VecX g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    VecX xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double rel_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Glorot weights plus small random biases.
inline MlpParams random_net(const std::vector<int>& sizes, std::uint64_t seed) {
  MlpParams p = glorot_network(sizes, seed);
  Rng rng(derive_seed(seed, 99));
  for (auto& layer : p.layers) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = rng.uniform(-0.5, 0.5);
  }
  return p;
}

/// C(q) = sigmoid(k (cos q_d - cos limit)) - 0.5: positive iff |q_d| < limit.
inline MlpParams single_dof_limit_net(int n_dofs, int dof, double limit, double sharpness) {
  MlpParams p = zero_network({2 * n_dofs, 1});
  p.layers[0].activation = Activation::kSigmoid;
  p.layers[0].weights(0, n_dofs + dof) = sharpness;
  p.layers[0].bias[0] = -sharpness * std::cos(limit);
  return p;
}

}  // namespace jltest
