#include "jointlimits/ik.hpp"

#include "jointlimits/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace jointlimits {

std::string to_string(PenaltyForm form) {
  switch (form) {
    case PenaltyForm::kShifted: return "shifted";
    case PenaltyForm::kSwitchOnly: return "switch-only";
    case PenaltyForm::kNone: return "none";
  }
  return "?";
}

PenaltyForm penalty_form_from_string(const std::string& s) {
  if (s == "shifted") return PenaltyForm::kShifted;
  if (s == "switch-only") return PenaltyForm::kSwitchOnly;
  if (s == "none") return PenaltyForm::kNone;
  throw ContractViolation("unknown penalty form '" + s + "'");
}

void IkProblem::validate() const {
  require(model != nullptr && ls != nullptr, "IK problem needs a model and a limit set");
  require(ls->n_dofs() == model->n_dofs(), "limit set and model disagree on the DOF count");
  require(q0.size() == model->n_dofs(), "initial configuration has the wrong size");
  require(step_size > 0.0, "step size must be positive");
  require(backtrack > 0.0 && backtrack < 1.0, "backtracking factor must lie in (0, 1)");
  require(tolerance > 0.0, "tolerance must be positive");
  require(max_iterations >= 0, "iteration cap must be nonnegative");
  require(weight >= 0.0, "penalty weight must be nonnegative");
  require(target.allFinite(), "target must be finite");
  const int ep = resolved_end_point();
  require(ep >= 0 && ep <= model->n_bones(), "end point index out of range");
}

int IkProblem::resolved_end_point() const { return end_point < 0 ? model->n_bones() : end_point; }

IkObjective objective(const IkProblem& p, const JointConfig& q) {
  const int ep = p.resolved_end_point();
  IkObjective out;
  out.error = forward_kinematics(*p.model, q)[ep] - p.target;
  out.value = out.error.squaredNorm();
  out.gradient = 2.0 * position_jacobian(*p.model, q, ep).transpose() * out.error;

  VecX grad_c;
  out.c = value_and_config_gradient(p.ls->net, q, grad_c);
  const double m = p.ls->ik_margin;
  if (p.penalty != PenaltyForm::kNone && out.c <= m) {
    const double r = p.penalty == PenaltyForm::kShifted ? out.c - m : out.c;
    out.value += p.weight * r * r;
    out.gradient += 2.0 * p.weight * r * grad_c;
  }
  return out;
}

namespace {

JointConfig project(const BoxLimits& boxes, JointConfig q) {
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (boxes[i]) q[i] = std::clamp(q[i], boxes[i]->lo, boxes[i]->hi);
  }
  return q;
}

IkResult finish(const IkProblem& p, const JointConfig& q, const IkObjective& obj, int iterations, bool converged) {
  IkResult r;
  r.q = q;
  r.residual = obj.error.norm();
  r.c = obj.c;
  r.iterations = iterations;
  r.converged = converged;
  r.within_boxes = within_boxes(*p.ls, q);
  return r;
}

}  // namespace

IkResult solve(const IkProblem& p) {
  p.validate();
  const BoxLimits& boxes = p.ls->boxes;
  const auto proj = [&](const JointConfig& q) { return p.project_boxes ? project(boxes, q) : q; };

  JointConfig q = proj(p.q0);
  IkObjective obj = objective(p, q);
  double alpha = p.step_size;
  const double max_alpha = 1e3 * p.step_size;
  int it = 0;
  for (;; ++it) {
    const double stationarity = (q - proj(q - obj.gradient)).norm();
    if (stationarity <= p.tolerance) return finish(p, q, obj, it, true);
    if (it >= p.max_iterations) break;

    const JointConfig q_prev = q;
    const VecX g_prev = obj.gradient;
    bool accepted = false;
    while (alpha > 1e-14) {
      VecX delta = -alpha * obj.gradient;
      const double len = delta.norm();
      if (p.max_step > 0.0 && len > p.max_step) delta *= p.max_step / len;
      const JointConfig trial = proj(q + delta);
      IkObjective next = objective(p, trial);
      if (next.value <= obj.value + 1e-4 * obj.gradient.dot(trial - q)) {
        q = trial;
        obj = std::move(next);
        accepted = true;
        break;
      }
      alpha *= p.backtrack;
    }
    if (!accepted) break;
    // Barzilai-Borwein estimate for the next trial step.
    const VecX sdiff = q - q_prev;
    const VecX ydiff = obj.gradient - g_prev;
    const double sy = sdiff.dot(ydiff);
    alpha = sy > 0.0 ? std::clamp(sdiff.squaredNorm() / sy, 1e-10, max_alpha) : std::min(alpha / p.backtrack, max_alpha);
  }
  return finish(p, q, obj, it, false);
}

JointConfig sample_valid_config(const LimbModel& model, const LimitSet& ls, double margin, Rng& rng) {
  const std::vector<Interval> box = default_sampling_box(model);
  JointConfig q(model.n_dofs());
  for (long attempt = 0; attempt < 10'000'000; ++attempt) {
    for (int i = 0; i < model.n_dofs(); ++i) q[i] = rng.uniform(box[i].lo, box[i].hi);
    if (within_boxes(ls, q) && c_value(ls, q) > margin) return q;
  }
  throw ContractViolation("no configuration with C(q) above the margin found");
}

JointConfig sample_box_config(const LimbModel& model, const LimitSet& ls, Rng& rng) {
  const std::vector<Interval> box = default_sampling_box(model);
  JointConfig q(model.n_dofs());
  do {
    for (int i = 0; i < model.n_dofs(); ++i) q[i] = rng.uniform(box[i].lo, box[i].hi);
  } while (!within_boxes(ls, q));
  return q;
}

std::vector<Vec3> sample_reachable_targets(const LimbModel& model, const LimitSet& ls, int count, double margin,
                                           std::uint64_t seed, int end_point) {
  require(count >= 0, "target count must be nonnegative");
  const int ep = end_point < 0 ? model.n_bones() : end_point;
  Rng rng(seed);
  std::vector<Vec3> targets;
  targets.reserve(count);
  for (int k = 0; k < count; ++k) targets.push_back(forward_kinematics(model, sample_valid_config(model, ls, margin, rng))[ep]);
  return targets;
}

std::vector<IkResult> solve_batch(const IkProblem& base, const std::vector<Vec3>& targets,
                                  const IkBatchOptions& options) {
  base.validate();
  require(options.max_restarts >= 0, "restart count must be nonnegative");
  const double floor = base.ls->ik_margin - options.restart_slack;
  const auto acceptable = [&](const IkResult& r) {
    return r.converged && (base.penalty == PenaltyForm::kNone || r.c >= floor);
  };

  std::vector<IkResult> results;
  results.reserve(targets.size());
  JointConfig start = base.q0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    IkProblem p = base;
    p.target = targets[k];
    p.q0 = start;
    IkResult best = solve(p);
    if (!acceptable(best) && options.max_restarts > 0) {
      Rng rng(derive_seed(options.seed, k));
      double best_value = objective(p, best.q).value;
      for (int attempt = 1; attempt <= options.max_restarts; ++attempt) {
        double closest = std::numeric_limits<double>::infinity();
        for (int c = 0; c < std::max(1, options.seed_candidates); ++c) {
          JointConfig cand = base.penalty == PenaltyForm::kNone ? sample_box_config(*base.model, *base.ls, rng)
                                                                : sample_valid_config(*base.model, *base.ls,
                                                                                      base.ls->ik_margin, rng);
          const double d = (forward_kinematics(*base.model, cand)[base.resolved_end_point()] - p.target).norm();
          if (d < closest) {
            closest = d;
            p.q0 = std::move(cand);
          }
        }
        IkResult r = solve(p);
        r.restarts = attempt;
        const double value = objective(p, r.q).value;
        if (acceptable(r)) {
          best = r;
          break;
        }
        if (value < best_value) {
          best = r;
          best_value = value;
        }
      }
    }
    if (options.warm_start) start = best.q;
    results.push_back(std::move(best));
  }
  return results;
}

void write_ik_csv(std::ostream& out, const LimbModel& model, const std::vector<Vec3>& targets,
                  const std::vector<IkResult>& results) {
  require(targets.size() == results.size(), "one result per target expected");
  out << "target_x,target_y,target_z";
  for (const auto& name : model.dof_names()) out << ',' << name;
  out << ",residual,c,iterations,converged,within_boxes\n";
  const auto old_precision = out.precision(17);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const IkResult& r = results[k];
    out << targets[k].x() << ',' << targets[k].y() << ',' << targets[k].z();
    for (Eigen::Index i = 0; i < r.q.size(); ++i) out << ',' << r.q[i];
    out << ',' << r.residual << ',' << r.c << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
        << (r.within_boxes ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace jointlimits
