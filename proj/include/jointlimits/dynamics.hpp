#pragma once

#include "jointlimits/constraint.hpp"
#include "jointlimits/kinematics.hpp"
#include "jointlimits/lcp.hpp"
#include "jointlimits/types.hpp"

#include <vector>

namespace jointlimits {

/// Mass properties of one bone, expressed in the bone frame.
struct SegmentInertia {
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  Mat3 inertia = Mat3::Zero();  // about the COM
};

struct BodyParams {
  std::vector<SegmentInertia> segments;

  /// mass > 0; inertia symmetric positive semidefinite (zero allowed for point masses).
  void validate(const LimbModel& model) const;
};

/// Solid cylinders along each bone's rest direction, COM at mid-length.
BodyParams cylinder_bodies(const LimbModel& model, const std::vector<double>& masses,
                           const std::vector<double>& radii);
/// Arm 2.0/1.5 kg, leg 7.0/3.5/1.0 kg.
BodyParams default_bodies(const LimbModel& model);

/// Joint-space inertia via the composite-rigid-body algorithm.
MatX mass_matrix(const LimbModel& model, const BodyParams& bodies, const JointConfig& q);
/// Coriolis, centrifugal and gravity terms via recursive Newton-Euler, so
/// that M(q) qdd + bias_forces(q, qd) = tau.
VecX bias_forces(const LimbModel& model, const BodyParams& bodies, const JointConfig& q, const VecX& qd,
                 const Vec3& gravity);
VecX forward_dynamics(const LimbModel& model, const BodyParams& bodies, const JointConfig& q, const VecX& qd,
                      const VecX& tau, const Vec3& gravity);
/// Kinetic plus gravitational potential energy.
double total_energy(const LimbModel& model, const BodyParams& bodies, const JointConfig& q, const VecX& qd,
                    const Vec3& gravity);

struct SimState {
  JointConfig q;
  VecX qd;
  double time = 0.0;
};

struct SimConfig {
  double dt = 1e-3;
  double baumgarte = 0.2;
  /// The learned-surface row activates once C(q) <= activation_tolerance.
  double activation_tolerance = 0.02;
  /// Also activate the surface row when the free motion would carry C(q)
  /// below activation_tolerance within the step.
  bool predictive_activation = true;
  /// Box rows activate within this distance (radians) of a bound.
  double box_activation = 0.02;
  bool learned_constraint = true;
  bool box_constraints = true;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  /// Per-DOF viscous joint damping (N m s / rad), integrated implicitly.
  /// Empty means undamped.
  VecX damping;
  /// DOFs held fixed at their current value.
  std::vector<int> locked_dofs;
  /// Surface rows whose gradient norm falls below this are dropped.
  double min_gradient_norm = 1e-6;
  LcpOptions lcp;
};

enum class RowKind { kSurface, kBoxLower, kBoxUpper };

struct ConstraintRow {
  RowKind kind = RowKind::kSurface;
  int dof = -1;  // box rows only
};

/// Velocity-level LCP for one step: find f >= 0 with v = A f + b >= 0 and
/// f.v = 0. Row i has joint-space Jacobian jacobian.row(i).
struct LcpProblem {
  MatX A;
  VecX b;
  std::vector<ConstraintRow> rows;
  MatX jacobian;         // m x n_dofs
  VecX qd_free;          // unconstrained next-step velocity
  MatX inv_mass_jt;      // n_dofs x m, effective M^-1 J^T (zero rows for locked DOFs)
  double c_value = 0.0;  // C(q) at assembly time
  bool surface_dropped = false;
};

LcpProblem assemble_lcp(const LimitSet& ls, const SimState& state, const MatX& mass, const VecX& bias,
                        const VecX& tau_ext, const SimConfig& cfg);
LcpSolution solve_lcp(const LcpProblem& problem, const LcpOptions& options = {});

struct StepInfo {
  LcpProblem problem;
  LcpSolution solution;
  VecX joint_impulse;  // J^T f
  VecX surface_impulse;  // (dC/dq)^T f_surface, zero when the surface row is inactive
};

/// Semi-implicit Euler step: qd+ = qd_free + M^-1 J^T f, q+ = q + dt qd+.
SimState step(const LimitSet& ls, const LimbModel& model, const BodyParams& bodies, const SimState& state,
              const VecX& tau_ext, const SimConfig& cfg, StepInfo* info = nullptr);

}  // namespace jointlimits
