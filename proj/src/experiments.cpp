#include "jointlimits/experiments.hpp"

#include "jointlimits/random.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace jointlimits {

namespace {

int slot_of(const ConstraintRow& row) {
  if (row.kind == RowKind::kSurface) return 0;
  return 1 + 2 * row.dof + (row.kind == RowKind::kBoxUpper ? 1 : 0);
}

template <typename TorqueFn>
RunSummary run(const LimitSet& ls, const LimbModel& model, const BodyParams& bodies, const SimConfig& cfg,
               SimState state, double duration, int record_every, bool keep, TorqueFn&& torque_at) {
  require(cfg.dt > 0.0 && duration >= 0.0, "time step must be positive and duration nonnegative");
  require(record_every >= 1, "record_every must be at least 1");
  const int n = model.n_dofs();
  RunSummary out;
  out.trajectory.dof_names = model.dof_names();
  const long steps = std::lround(duration / cfg.dt);
  StepInfo info;
  for (long k = 0; k < steps; ++k) {
    const VecX tau = torque_at(k, state.time);
    state = step(ls, model, bodies, state, tau, cfg, &info);
    if (info.problem.surface_dropped) ++out.dropped_surface_rows;
    if ((k + 1) % record_every != 0) continue;
    const double c = c_value(ls, state.q);
    out.c_values.push_back(c);
    if (keep) out.trajectory.records.push_back(make_record(state, c, &info, n));
  }
  out.steps = steps;
  return out;
}

SimState initial_state(const LimbModel& model, const JointConfig& q0, const VecX& qd0) {
  const int n = model.n_dofs();
  SimState s;
  s.q = q0.size() == 0 ? JointConfig(JointConfig::Zero(n)) : q0;
  s.qd = qd0.size() == 0 ? VecX(VecX::Zero(n)) : qd0;
  require(s.q.size() == n && s.qd.size() == n, "initial state has the wrong size");
  return s;
}

}  // namespace

TrajectoryRecord make_record(const SimState& state, double c, const StepInfo* info, int n_dofs) {
  TrajectoryRecord r;
  r.time = state.time;
  r.q = state.q;
  r.qd = state.qd;
  r.c = c;
  r.active.assign(1 + 2 * n_dofs, false);
  r.impulse = VecX::Zero(1 + 2 * n_dofs);
  if (info) {
    for (std::size_t i = 0; i < info->problem.rows.size(); ++i) {
      const int slot = slot_of(info->problem.rows[i]);
      r.active[slot] = true;
      r.impulse[slot] = info->solution.f[static_cast<Eigen::Index>(i)];
    }
  }
  return r;
}

RunSummary run_random_torque(const LimitSet& ls, const LimbModel& model, const BodyParams& bodies,
                             const SimConfig& cfg, const RandomTorqueOptions& options) {
  const int n = model.n_dofs();
  require(options.torque_limit.size() == n, "torque_limit needs one entry per DOF");
  require(options.resample_period > 0.0, "resample period must be positive");
  const long per_draw = std::max(1L, std::lround(options.resample_period / cfg.dt));
  Rng rng(options.seed);
  VecX tau = VecX::Zero(n);
  auto torque_at = [&](long k, double) -> VecX {
    if (k % per_draw == 0) {
      for (int i = 0; i < n; ++i) tau[i] = rng.uniform(-options.torque_limit[i], options.torque_limit[i]);
    }
    return tau;
  };
  return run(ls, model, bodies, cfg, initial_state(model, options.q0, VecX()), options.duration,
             options.record_every, options.keep_trajectory, torque_at);
}

RunSummary run_constant_torque(const LimitSet& ls, const LimbModel& model, const BodyParams& bodies,
                               const SimConfig& cfg, const ConstantTorqueOptions& options) {
  require(options.torque.size() == model.n_dofs(), "torque needs one entry per DOF");
  auto torque_at = [&](long, double) -> VecX { return options.torque; };
  return run(ls, model, bodies, cfg, initial_state(model, options.q0, options.qd0), options.duration,
             options.record_every, options.keep_trajectory, torque_at);
}

long Histogram::total() const {
  long t = underflow + overflow;
  for (long c : counts) t += c;
  return t;
}

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int bins) {
  require(bins > 0 && lo < hi, "histogram needs bins > 0 and lo < hi");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (v < lo) {
      ++h.underflow;
    } else if (v >= hi) {
      ++h.overflow;
    } else {
      const int b = std::min(bins - 1, static_cast<int>((v - lo) / h.bin_width()));
      ++h.counts[b];
    }
  }
  return h;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "time";
  for (const auto& name : traj.dof_names) out << ',' << name;
  for (const auto& name : traj.dof_names) out << ",qd_" << name;
  out << ",c,active_surface";
  for (const auto& name : traj.dof_names) out << ",active_" << name << "_lo,active_" << name << "_hi";
  out << ",f_surface";
  for (const auto& name : traj.dof_names) out << ",f_" << name << "_lo,f_" << name << "_hi";
  out << '\n';
  const auto old_precision = out.precision(17);
  for (const auto& r : traj.records) {
    out << r.time;
    for (Eigen::Index i = 0; i < r.q.size(); ++i) out << ',' << r.q[i];
    for (Eigen::Index i = 0; i < r.qd.size(); ++i) out << ',' << r.qd[i];
    out << ',' << r.c;
    for (bool a : r.active) out << ',' << (a ? 1 : 0);
    for (Eigen::Index i = 0; i < r.impulse.size(); ++i) out << ',' << r.impulse[i];
    out << '\n';
  }
  out.precision(old_precision);
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  const auto old_precision = out.precision(17);
  out << "bin_lo,bin_hi,count\n";
  out << "-inf," << h.lo << ',' << h.underflow << '\n';
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out << h.lo + static_cast<double>(b) * h.bin_width() << ',' << h.lo + static_cast<double>(b + 1) * h.bin_width()
        << ',' << h.counts[b] << '\n';
  }
  out << h.hi << ",inf," << h.overflow << '\n';
  out.precision(old_precision);
}

}  // namespace jointlimits
