#include "jointlimits/constraint.hpp"

#include "support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace jltest;

namespace {

LimitSet arm_set(const MlpParams& net) { return {net, arm_model().boxes(), 0.02}; }

}  // namespace

TEST_CASE("validity is the conjunction of the surface and the boxes") {
  const LimitSet ls = arm_set(single_dof_limit_net(4, 0, deg2rad(90.0), 10.0));
  Rng rng(1);
  int both = 0;
  for (int k = 0; k < 5000; ++k) {
    const JointConfig q = random_config(rng, 4);
    const bool surface = std::abs(q[0]) < deg2rad(90.0);
    const bool boxes = q[2] >= deg2rad(-60.0) && q[2] <= deg2rad(120.0) && q[3] >= 0.0 && q[3] <= kPi;
    CHECK(is_config_valid(ls, q) == (surface && boxes));
    CHECK(within_boxes(ls, q) == boxes);
    CHECK((c_value(ls, q) > 0) == surface);
    both += surface && boxes;
  }
  CHECK(both > 500);
}

TEST_CASE("boxes separate configurations with identical joint positions") {
  MlpParams always = zero_network({8, 1});
  always.layers[0].activation = Activation::kSigmoid;
  always.layers[0].bias[0] = 3.0;
  const LimitSet ls = arm_set(always);
  JointConfig inside(4), outside(4);
  inside << 0.4, 0.3, deg2rad(10.0), 0.0;
  outside << 0.4, 0.3, deg2rad(150.0), 0.0;
  const auto a = forward_kinematics(arm_model(), inside), b = forward_kinematics(arm_model(), outside);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() < 1e-12);
  CHECK(c_value(ls, inside) == c_value(ls, outside));
  CHECK(is_config_valid(ls, inside));
  CHECK_FALSE(is_config_valid(ls, outside));
}

TEST_CASE("gradient of C") {
  const LimitSet ls = arm_set(random_net(limit_network_sizes(4), 2));
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const JointConfig q = random_config(rng, 4);
    const VecX g = c_gradient(ls, q);
    const VecX f = fd_gradient([&](const VecX& v) { return c_value(ls, v); }, q, 1e-5);
    CHECK((g - f).norm() <= 1e-8 * (1 + f.norm()));
  }
}

TEST_CASE("limit set bundle round trip") {
  const LimitSet ls = {random_net(limit_network_sizes(6), 4), leg_model().boxes(), 0.03};
  const auto dir = std::filesystem::temp_directory_path() / "jointlimits_test_bundle";
  std::filesystem::create_directories(dir);
  save_weights(ls.net, dir / "leg_weights.json");
  save_limit_set(ls, dir / "leg_limits.json", "leg_weights.json");
  const LimitSet back = load_limit_set(dir / "leg_limits.json");
  CHECK(back.ik_margin == 0.03);
  CHECK(back.boxes.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back.boxes[i].has_value() == ls.boxes[i].has_value());
    if (ls.boxes[i]) {
      CHECK(back.boxes[i]->lo == doctest::Approx(ls.boxes[i]->lo).epsilon(1e-14));
      CHECK(back.boxes[i]->hi == doctest::Approx(ls.boxes[i]->hi).epsilon(1e-14));
    }
  }
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const JointConfig q = random_config(rng, 6);
    CHECK(c_value(back, q) == c_value(ls, q));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("limit set contract") {
  LimitSet ls = arm_set(random_net(limit_network_sizes(6), 6));
  CHECK_THROWS_AS(ls.validate(), ContractViolation);
  ls = arm_set(random_net(limit_network_sizes(4), 6));
  ls.validate();
  ls.ik_margin = -1.0;
  CHECK_THROWS_AS(ls.validate(), ContractViolation);
  ls = arm_set(random_net(limit_network_sizes(4), 6));
  ls.boxes[3] = Interval{1.0, 0.5};
  CHECK_THROWS_AS(ls.validate(), ContractViolation);
  CHECK_THROWS_AS(within_boxes(ls, JointConfig::Zero(6)), ContractViolation);
  CHECK_THROWS_AS(limit_set_from_json({{"version", 7}}, "."), UnsupportedVersion);
}
