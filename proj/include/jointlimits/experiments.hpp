#pragma once

#include "jointlimits/dynamics.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace jointlimits {

/// Fixed-width record of one simulated state. The mask and impulse columns
/// are laid out as [surface, lower(0), upper(0), lower(1), upper(1), ...].
struct TrajectoryRecord {
  double time = 0.0;
  JointConfig q;
  VecX qd;
  double c = 0.0;
  std::vector<bool> active;
  VecX impulse;
};

struct Trajectory {
  std::vector<std::string> dof_names;
  std::vector<TrajectoryRecord> records;
};

TrajectoryRecord make_record(const SimState& state, double c, const StepInfo* info, int n_dofs);

struct RandomTorqueOptions {
  double duration = 60.0;
  /// New torques are drawn uniformly from [-torque_limit, torque_limit] this often.
  double resample_period = 0.1;
  VecX torque_limit;
  std::uint64_t seed = 1;
  JointConfig q0;  // empty means q = 0
  /// Keep every n-th state.
  int record_every = 1;
  bool keep_trajectory = true;
};

struct RunSummary {
  Trajectory trajectory;
  /// C(q) of every recorded state.
  std::vector<double> c_values;
  long steps = 0;
  long dropped_surface_rows = 0;
};

RunSummary run_random_torque(const LimitSet& ls, const LimbModel& model, const BodyParams& bodies,
                             const SimConfig& cfg, const RandomTorqueOptions& options);

struct ConstantTorqueOptions {
  double duration = 5.0;
  VecX torque;
  JointConfig q0;
  VecX qd0;  // empty means at rest
  int record_every = 1;
  bool keep_trajectory = true;
};

RunSummary run_constant_torque(const LimitSet& ls, const LimbModel& model, const BodyParams& bodies,
                               const SimConfig& cfg, const ConstantTorqueOptions& options);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<long> counts;
  long underflow = 0;
  long overflow = 0;

  long total() const;
  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int bins);

/// Header: time,<q names>,<qd names>,c,active_surface,active_<dof>_lo,...,f_surface,f_<dof>_lo,...
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// Header: bin_lo,bin_hi,count (underflow and overflow as open-ended rows).
void write_histogram_csv(std::ostream& out, const Histogram& h);

}  // namespace jointlimits
