#pragma once

#include "jointlimits/constraint.hpp"
#include "jointlimits/kinematics.hpp"
#include "jointlimits/random.hpp"
#include "jointlimits/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace jointlimits {

/// How the learned constraint enters the IK objective once C(q) <= margin.
enum class PenaltyForm {
  kShifted,     // w (C - m)^2: pulls solutions back above the margin
  kSwitchOnly,  // w C^2: the penalty only switches on at the margin
  kNone,        // unconstrained (boxes still apply)
};

std::string to_string(PenaltyForm form);
PenaltyForm penalty_form_from_string(const std::string& s);

struct IkProblem {
  const LimbModel* model = nullptr;
  const LimitSet* ls = nullptr;
  Vec3 target = Vec3::Zero();
  /// Chain point to place; -1 selects the last point.
  int end_point = -1;
  JointConfig q0;
  double step_size = 0.1;
  double backtrack = 0.5;
  /// Longest joint-space move per iteration (radians); <= 0 disables the cap.
  double max_step = 0.1;
  int max_iterations = 500;
  /// Convergence threshold on the projected gradient norm.
  double tolerance = 1e-6;
  double weight = 0.2;
  PenaltyForm penalty = PenaltyForm::kShifted;
  /// Project onto the box limits after every step.
  bool project_boxes = true;

  void validate() const;
  int resolved_end_point() const;
};

struct IkObjective {
  double value = 0.0;
  VecX gradient;
  double c = 0.0;
  Vec3 error = Vec3::Zero();  // f(q) - target
};

/// G(q) = |f(q) - target|^2 + penalty(C(q)).
IkObjective objective(const IkProblem& p, const JointConfig& q);

struct IkResult {
  JointConfig q;
  double residual = 0.0;  // |f(q) - target|, meters
  double c = 0.0;
  int iterations = 0;
  bool converged = false;
  bool within_boxes = true;
  int restarts = 0;
};

/// Projected gradient descent with backtracking. Deterministic.
IkResult solve(const IkProblem& p);

struct IkBatchOptions {
  /// Start each target from the previous solution instead of q0.
  bool warm_start = true;
  /// Extra attempts from sampled valid seeds when a solve fails to converge
  /// or ends below the margin.
  int max_restarts = 0;
  /// A solve counts as failed when it ends below margin - restart_slack.
  double restart_slack = 1e-3;
  /// Each restart seed is the sample, out of this many, whose end point
  /// lies closest to the target. Samples satisfy C(q) > margin unless the
  /// penalty is off.
  int seed_candidates = 64;
  std::uint64_t seed = 1;
};

/// Solves the targets in order.
std::vector<IkResult> solve_batch(const IkProblem& base, const std::vector<Vec3>& targets,
                                  const IkBatchOptions& options = {});

/// Draws from the default sampling box kept when C(q) > margin and the boxes
/// hold, mapped to end-point positions.
std::vector<Vec3> sample_reachable_targets(const LimbModel& model, const LimitSet& ls, int count, double margin,
                                           std::uint64_t seed, int end_point = -1);
/// Uniform draw inside the box limits, ignoring C.
JointConfig sample_box_config(const LimbModel& model, const LimitSet& ls, Rng& rng);
JointConfig sample_valid_config(const LimbModel& model, const LimitSet& ls, double margin, Rng& rng);

/// Header: target_x,target_y,target_z,<dof names>,residual,c,iterations,converged,within_boxes
void write_ik_csv(std::ostream& out, const LimbModel& model, const std::vector<Vec3>& targets,
                  const std::vector<IkResult>& results);

}  // namespace jointlimits
