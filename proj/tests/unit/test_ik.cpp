#include "jointlimits/ik.hpp"

#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace jltest;

namespace {

MlpParams always_valid(int n) {
  MlpParams p = zero_network({2 * n, 1});
  p.layers[0].activation = Activation::kSigmoid;
  p.layers[0].bias[0] = 4.0;
  return p;
}

IkProblem problem(const LimbModel& model, const LimitSet& ls, const Vec3& target) {
  IkProblem p;
  p.model = &model;
  p.ls = &ls;
  p.target = target;
  p.q0 = JointConfig::Zero(model.n_dofs());
  return p;
}

}  // namespace

TEST_CASE("objective gradient matches finite differences on both sides of the margin") {
  Rng rng(1);
  for (const auto& limb : {std::string("arm"), std::string("leg")}) {
    const LimbModel model = limb_model(limb);
    LimitSet ls{random_net(limit_network_sizes(model.n_dofs()), 2), model.boxes(), 0.02};
    // Centre the output on the margin so both branches are sampled.
    std::vector<double> cs;
    for (int k = 0; k < 201; ++k) cs.push_back(c_value(ls, random_config(rng, model.n_dofs())));
    std::nth_element(cs.begin(), cs.begin() + 100, cs.end());
    ls.net.output_shift += ls.ik_margin - cs[100];
    for (PenaltyForm form : {PenaltyForm::kShifted, PenaltyForm::kSwitchOnly, PenaltyForm::kNone}) {
      IkProblem p = problem(model, ls, Vec3(0.1, 0.2, -0.3));
      p.penalty = form;
      p.weight = 3.0;
      int below = 0, above = 0;
      for (int k = 0; k < 200; ++k) {
        const JointConfig q = random_config(rng, model.n_dofs());
        const IkObjective o = objective(p, q);
        if (std::abs(o.c - ls.ik_margin) < 1e-3) continue;
        (o.c < ls.ik_margin ? below : above)++;
        const VecX fd = fd_gradient([&](const VecX& v) { return objective(p, v).value; }, q, 1e-6);
        CHECK((o.gradient - fd).norm() <= 1e-6 * (1 + fd.norm()));
        const Vec3 err = forward_kinematics(model, q).back() - p.target;
        double expected = err.squaredNorm();
        if (form != PenaltyForm::kNone && o.c <= ls.ik_margin) {
          const double r = form == PenaltyForm::kShifted ? o.c - ls.ik_margin : o.c;
          expected += 3.0 * r * r;
        }
        CHECK(o.value == doctest::Approx(expected).epsilon(1e-12));
      }
      CHECK(below > 10);
      CHECK(above > 10);
    }
  }
}

TEST_CASE("a target at the current end point converges immediately") {
  const LimbModel model = arm_model();
  const LimitSet ls{always_valid(4), model.boxes(), 0.02};
  JointConfig q0(4);
  q0 << 0.3, 0.2, 0.1, 1.2;
  IkProblem p = problem(model, ls, forward_kinematics(model, q0).back());
  p.q0 = q0;
  const IkResult r = solve(p);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK(r.residual <= 1e-9);
}

TEST_CASE("targets near the start are reached without a constraint in the way") {
  Rng rng(3);
  for (const auto& limb : {std::string("arm"), std::string("leg")}) {
    const LimbModel model = limb_model(limb);
    const LimitSet ls{always_valid(model.n_dofs()), model.boxes(), 0.02};
    int close = 0;
    for (int k = 0; k < 30; ++k) {
      JointConfig goal = sample_valid_config(model, ls, 0.02, rng);
      goal[3] = rng.uniform(0.3, 2.8);
      IkProblem p = problem(model, ls, forward_kinematics(model, goal).back());
      p.q0 = goal + random_config(rng, model.n_dofs(), -0.2, 0.2);
      const IkResult r = solve(p);
      CHECK(r.within_boxes);
      close += r.converged && r.residual < 1e-4;
    }
    CHECK(close >= 29);
  }
}

TEST_CASE("unreachable targets leave the residual at the reach bound") {
  const LimbModel model = arm_model();
  const LimitSet ls{always_valid(4), model.boxes(), 0.02};
  for (const Vec3& t : {Vec3(1.5, 0, 0), Vec3(0, -0.7, 0.9), Vec3(0.2, 2.0, -1.0)}) {
    IkProblem p = problem(model, ls, t);
    p.max_iterations = 2000;
    const IkResult r = solve(p);
    CHECK(r.residual >= t.norm() - 0.55 - 1e-12);
    CHECK(r.residual == doctest::Approx(t.norm() - 0.55).epsilon(1e-3));
  }
}

TEST_CASE("iterates descend monotonically and stay in the boxes") {
  const LimbModel model = leg_model();
  const LimitSet ls{random_net(limit_network_sizes(6), 5), model.boxes(), 0.02};
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    IkProblem p = problem(model, ls, Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.9, 0)));
    double last = objective(p, p.q0).value;
    for (int k = 1; k <= 30; ++k) {
      p.max_iterations = k;
      const IkResult r = solve(p);
      const double v = objective(p, r.q).value;
      CHECK(v <= last + 1e-15);
      CHECK(r.within_boxes);
      last = v;
    }
  }
}

TEST_CASE("the penalty keeps solutions off the learned limit") {
  const LimbModel model = arm_model();
  const LimitSet ls{single_dof_limit_net(4, 3, deg2rad(90.0), 10.0), model.boxes(), 0.02};
  JointConfig bent(4);
  bent << 0.2, 0.1, 0.0, deg2rad(140.0);
  const Vec3 target = forward_kinematics(model, bent).back();
  IkProblem p = problem(model, ls, target);
  p.q0[3] = 0.5;
  p.penalty = PenaltyForm::kNone;
  const IkResult free = solve(p);
  CHECK(free.residual < 1e-3);
  CHECK(free.c < 0.0);
  p.penalty = PenaltyForm::kShifted;
  p.weight = 1.0;
  const IkResult held = solve(p);
  CHECK(held.converged);
  CHECK(held.c >= 0.0);
  CHECK(held.residual > free.residual);
}

TEST_CASE("solving is deterministic") {
  const LimbModel model = arm_model();
  const LimitSet ls{random_net(limit_network_sizes(4), 7), model.boxes(), 0.02};
  const auto targets = sample_reachable_targets(model, ls, 10, 0.02, 8);
  IkBatchOptions opt;
  opt.max_restarts = 2;
  const auto a = solve_batch(problem(model, ls, Vec3::Zero()), targets, opt);
  const auto b = solve_batch(problem(model, ls, Vec3::Zero()), targets, opt);
  REQUIRE(a.size() == 10);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].q == b[k].q);
    CHECK(a[k].iterations == b[k].iterations);
  }
  for (const auto& t : sample_reachable_targets(model, ls, 50, 0.02, 9)) CHECK(t.norm() <= 0.55 + 1e-12);
}

TEST_CASE("IK contract and CSV") {
  const LimbModel model = arm_model();
  const LimitSet ls{always_valid(4), model.boxes(), 0.02};
  IkProblem p = problem(model, ls, Vec3(0, 0, -0.5));
  p.q0 = JointConfig::Zero(3);
  CHECK_THROWS_AS(solve(p), ContractViolation);
  p.q0 = JointConfig::Zero(4);
  p.end_point = 5;
  CHECK_THROWS_AS(solve(p), ContractViolation);
  p.end_point = 1;
  const IkResult r = solve(p);
  CHECK(r.residual == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(penalty_form_from_string(to_string(PenaltyForm::kSwitchOnly)) == PenaltyForm::kSwitchOnly);
  CHECK_THROWS_AS(penalty_form_from_string("hard"), ContractViolation);

  std::ostringstream out;
  write_ik_csv(out, model, {p.target}, {r});
  const std::string text = out.str();
  CHECK(text.rfind("target_x,target_y,target_z,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK_THROWS_AS(write_ik_csv(out, model, {p.target, p.target}, {r}), ContractViolation);
}
