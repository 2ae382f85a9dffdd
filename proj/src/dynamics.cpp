#include "jointlimits/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace jointlimits {

namespace {

// Spatial vectors in world coordinates with the reference point at the
// world origin: motion (angular; linear velocity of the point at the origin),
// force (moment about the origin; force).
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

Vec6 cross_motion(const Vec6& v, const Vec6& m) {
  const Vec3 w = v.head<3>(), vo = v.tail<3>();
  Vec6 out;
  out << w.cross(m.head<3>()), vo.cross(m.head<3>()) + w.cross(m.tail<3>());
  return out;
}

Vec6 cross_force(const Vec6& v, const Vec6& f) {
  const Vec3 w = v.head<3>(), vo = v.tail<3>();
  Vec6 out;
  out << w.cross(f.head<3>()) + vo.cross(f.tail<3>()), w.cross(f.tail<3>());
  return out;
}

/// Spatial inertia about the world origin of a body with world COM `c`.
Mat6 spatial_inertia(double mass, const Vec3& c, const Mat3& inertia_com) {
  const Mat3 cx = skew(c);
  Mat6 I;
  I.topLeftCorner<3, 3>() = inertia_com - mass * cx * cx;
  I.topRightCorner<3, 3>() = mass * cx;
  I.bottomLeftCorner<3, 3>() = mass * cx.transpose();
  I.bottomRightCorner<3, 3>() = mass * Mat3::Identity();
  return I;
}

struct ChainDynamics {
  ChainFrames frames;
  std::vector<Vec6> S;       // motion subspace per DOF
  std::vector<Mat6> inertia; // per bone, world frame
  std::vector<int> last_dof; // last DOF of each bone
};

ChainDynamics prepare(const LimbModel& model, const BodyParams& bodies, const JointConfig& q) {
  ChainDynamics cd;
  cd.frames = chain_frames(model, q);
  require(static_cast<int>(bodies.segments.size()) == model.n_bones(), "need one segment inertia per bone");
  const int n = model.n_dofs();
  cd.S.resize(n);
  for (int k = 0; k < n; ++k) {
    const Vec3& z = cd.frames.dof_axis[k];
    cd.S[k] << z, cd.frames.dof_origin[k].cross(z);
  }
  cd.last_dof.assign(model.n_bones(), -1);
  for (int k = 0; k < n; ++k) cd.last_dof[cd.frames.dof_bone[k]] = k;
  for (int b = 0; b < model.n_bones(); ++b) {
    const auto& seg = bodies.segments[b];
    const Mat3& R = cd.frames.bone_rotation[b];
    const Vec3 c = cd.frames.points[b] + R * seg.com;
    cd.inertia.push_back(spatial_inertia(seg.mass, c, R * seg.inertia * R.transpose()));
  }
  return cd;
}

}  // namespace

void BodyParams::validate(const LimbModel& model) const {
  require(static_cast<int>(segments.size()) == model.n_bones(), "need one segment inertia per bone");
  for (const auto& s : segments) {
    require(s.mass > 0.0 && std::isfinite(s.mass), "segment masses must be positive");
    require((s.inertia - s.inertia.transpose()).cwiseAbs().maxCoeff() < 1e-12, "segment inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> eig(s.inertia);
    require(eig.eigenvalues().minCoeff() >= -1e-12, "segment inertia must be positive semidefinite");
  }
}

BodyParams cylinder_bodies(const LimbModel& model, const std::vector<double>& masses,
                           const std::vector<double>& radii) {
  require(static_cast<int>(masses.size()) == model.n_bones() && static_cast<int>(radii.size()) == model.n_bones(),
          "need one mass and radius per bone");
  BodyParams bp;
  for (int b = 0; b < model.n_bones(); ++b) {
    const double m = masses[b], r = radii[b], len = model.bone_lengths[b];
    const Vec3 d = model.rest_directions[b];
    const double axial = 0.5 * m * r * r;
    const double transverse = m * (3.0 * r * r + len * len) / 12.0;
    SegmentInertia s;
    s.mass = m;
    s.com = 0.5 * len * d;
    s.inertia = transverse * Mat3::Identity() + (axial - transverse) * d * d.transpose();
    bp.segments.push_back(s);
  }
  return bp;
}

BodyParams default_bodies(const LimbModel& model) {
  if (model.name == "arm") return cylinder_bodies(model, {2.0, 1.5}, {0.045, 0.035});
  if (model.name == "leg") return cylinder_bodies(model, {7.0, 3.5, 1.0}, {0.07, 0.05, 0.04});
  throw ContractViolation("no default body parameters for limb '" + model.name + "'");
}

MatX mass_matrix(const LimbModel& model, const BodyParams& bodies, const JointConfig& q) {
  const ChainDynamics cd = prepare(model, bodies, q);
  const int n = model.n_dofs();
  const int nb = model.n_bones();
  // Composite inertia of everything outboard of each bone.
  std::vector<Mat6> composite(nb);
  Mat6 acc = Mat6::Zero();
  for (int b = nb - 1; b >= 0; --b) {
    acc += cd.inertia[b];
    composite[b] = acc;
  }
  MatX M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      // DOF j is at or beyond DOF i; its subtree is the smaller one.
      const Vec6 Fj = composite[cd.frames.dof_bone[j]] * cd.S[j];
      M(i, j) = M(j, i) = cd.S[i].dot(Fj);
    }
  }
  return M;
}

VecX bias_forces(const LimbModel& model, const BodyParams& bodies, const JointConfig& q, const VecX& qd,
                 const Vec3& gravity) {
  const ChainDynamics cd = prepare(model, bodies, q);
  const int n = model.n_dofs();
  require(qd.size() == n, "velocity size does not match the model");
  const int nb = model.n_bones();

  // Forward pass with qdd = 0; gravity enters as a base acceleration.
  Vec6 vel = Vec6::Zero();
  Vec6 acc;
  acc << Vec3::Zero(), -gravity;
  std::vector<Vec6> body_force(nb, Vec6::Zero());
  for (int k = 0; k < n; ++k) {
    const Vec6 sq = cd.S[k] * qd[k];
    acc += cross_motion(vel, sq);
    vel += sq;
    const int b = cd.frames.dof_bone[k];
    if (cd.last_dof[b] == k) body_force[b] = cd.inertia[b] * acc + cross_force(vel, cd.inertia[b] * vel);
  }
  // Backward pass: each DOF carries the force of its whole subtree.
  std::vector<Vec6> subtree(nb);
  Vec6 f = Vec6::Zero();
  for (int b = nb - 1; b >= 0; --b) {
    f += body_force[b];
    subtree[b] = f;
  }
  VecX tau(n);
  for (int k = 0; k < n; ++k) tau[k] = cd.S[k].dot(subtree[cd.frames.dof_bone[k]]);
  return tau;
}

VecX forward_dynamics(const LimbModel& model, const BodyParams& bodies, const JointConfig& q, const VecX& qd,
                      const VecX& tau, const Vec3& gravity) {
  const MatX M = mass_matrix(model, bodies, q);
  return M.ldlt().solve(tau - bias_forces(model, bodies, q, qd, gravity));
}

double total_energy(const LimbModel& model, const BodyParams& bodies, const JointConfig& q, const VecX& qd,
                    const Vec3& gravity) {
  const MatX M = mass_matrix(model, bodies, q);
  const ChainFrames fr = chain_frames(model, q);
  double potential = 0.0;
  for (int b = 0; b < model.n_bones(); ++b) {
    const Vec3 c = fr.points[b] + fr.bone_rotation[b] * bodies.segments[b].com;
    potential -= bodies.segments[b].mass * gravity.dot(c);
  }
  return 0.5 * qd.dot(M * qd) + potential;
}

LcpProblem assemble_lcp(const LimitSet& ls, const SimState& state, const MatX& mass, const VecX& bias,
                        const VecX& tau_ext, const SimConfig& cfg) {
  require(cfg.dt > 0.0, "time step must be positive");
  const auto n = state.q.size();
  require(mass.rows() == n && bias.size() == n && tau_ext.size() == n && state.qd.size() == n,
          "state, mass matrix, bias and torque sizes disagree");

  std::vector<bool> locked(n, false);
  for (int d : cfg.locked_dofs) {
    require(d >= 0 && d < n, "locked DOF index out of range");
    locked[d] = true;
  }
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!locked[i]) free.push_back(i);
  }
  const auto nf = static_cast<Eigen::Index>(free.size());

  // Effective mass with implicit damping: (M + dt D) qd+ = M qd + dt (tau - bias) + J^T f.
  MatX Mf(nf, nf);
  VecX rhs(nf);
  for (Eigen::Index r = 0; r < nf; ++r) {
    for (Eigen::Index c = 0; c < nf; ++c) Mf(r, c) = mass(free[r], free[c]);
    rhs[r] = cfg.dt * (tau_ext[free[r]] - bias[free[r]]);
  }
  VecX qdf(nf);
  for (Eigen::Index r = 0; r < nf; ++r) qdf[r] = state.qd[free[r]];
  rhs += Mf * qdf;
  if (cfg.damping.size() > 0) {
    require(cfg.damping.size() == n, "damping needs one entry per DOF");
    for (Eigen::Index r = 0; r < nf; ++r) Mf(r, r) += cfg.dt * cfg.damping[free[r]];
  }
  const Eigen::LDLT<MatX> solver(Mf);

  LcpProblem p;
  p.qd_free = VecX::Zero(n);
  const VecX qd_free_f = nf > 0 ? VecX(solver.solve(rhs)) : VecX();
  for (Eigen::Index r = 0; r < nf; ++r) p.qd_free[free[r]] = qd_free_f[r];

  std::vector<VecX> rows_j;
  std::vector<double> rows_b;
  if (cfg.learned_constraint) {
    VecX grad;
    p.c_value = value_and_config_gradient(ls.net, state.q, grad);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (locked[i]) grad[i] = 0.0;
    }
    const double predicted = p.c_value + cfg.dt * grad.dot(p.qd_free);
    const double eps = cfg.activation_tolerance;
    if (p.c_value <= eps || (cfg.predictive_activation && predicted <= eps)) {
      if (grad.norm() < cfg.min_gradient_norm) {
        p.surface_dropped = true;
      } else {
        p.rows.push_back({RowKind::kSurface, -1});
        rows_j.push_back(grad);
        // Above the activation band the row only stops the approach at its edge.
        const double position_term = p.c_value > eps ? (p.c_value - eps) / cfg.dt
                                                     : -cfg.baumgarte * std::max(0.0, -p.c_value) / cfg.dt;
        rows_b.push_back(grad.dot(p.qd_free) + position_term);
      }
    }
  } else {
    p.c_value = c_value(ls, state.q);
  }
  if (cfg.box_constraints) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (locked[i] || !ls.boxes[i]) continue;
      const Interval box = *ls.boxes[i];
      // Speculative rows: the bound may be approached but not crossed within the step.
      const double gaps[2] = {state.q[i] - box.lo, box.hi - state.q[i]};
      for (int side = 0; side < 2; ++side) {
        const double sign = side == 0 ? 1.0 : -1.0;
        const double gap = gaps[side];
        const double approach = std::max(0.0, -sign * p.qd_free[i]) * cfg.dt;
        if (gap - approach > cfg.box_activation) continue;
        VecX j = VecX::Zero(n);
        j[i] = sign;
        p.rows.push_back({side == 0 ? RowKind::kBoxLower : RowKind::kBoxUpper, static_cast<int>(i)});
        rows_j.push_back(j);
        const double position_term = gap >= 0.0 ? gap / cfg.dt : cfg.baumgarte * gap / cfg.dt;
        rows_b.push_back(sign * p.qd_free[i] + position_term);
      }
    }
  }

  const auto m = static_cast<Eigen::Index>(p.rows.size());
  p.jacobian = MatX::Zero(m, n);
  p.b = VecX(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    p.jacobian.row(r) = rows_j[r].transpose();
    p.b[r] = rows_b[r];
  }
  p.inv_mass_jt = MatX::Zero(n, m);
  if (m > 0 && nf > 0) {
    MatX jt_free(nf, m);
    for (Eigen::Index r = 0; r < nf; ++r) jt_free.row(r) = p.jacobian.col(free[r]).transpose();
    const MatX sol = solver.solve(jt_free);
    for (Eigen::Index r = 0; r < nf; ++r) p.inv_mass_jt.row(free[r]) = sol.row(r);
  }
  p.A = p.jacobian * p.inv_mass_jt;
  p.A = 0.5 * (p.A + p.A.transpose());
  return p;
}

LcpSolution solve_lcp(const LcpProblem& problem, const LcpOptions& options) {
  return solve_lcp(problem.A, problem.b, options);
}

SimState step(const LimitSet& ls, const LimbModel& model, const BodyParams& bodies, const SimState& state,
              const VecX& tau_ext, const SimConfig& cfg, StepInfo* info) {
  const MatX M = mass_matrix(model, bodies, state.q);
  const VecX bias = bias_forces(model, bodies, state.q, state.qd, cfg.gravity);
  LcpProblem problem = assemble_lcp(ls, state, M, bias, tau_ext, cfg);
  LcpSolution sol = solve_lcp(problem, cfg.lcp);

  SimState next;
  next.qd = problem.qd_free + problem.inv_mass_jt * sol.f;
  next.q = state.q + cfg.dt * next.qd;
  next.time = state.time + cfg.dt;

  if (info) {
    info->joint_impulse = problem.jacobian.transpose() * sol.f;
    info->surface_impulse = VecX::Zero(state.q.size());
    for (std::size_t r = 0; r < problem.rows.size(); ++r) {
      if (problem.rows[r].kind == RowKind::kSurface) {
        info->surface_impulse = problem.jacobian.row(static_cast<Eigen::Index>(r)).transpose() * sol.f[r];
      }
    }
    info->problem = std::move(problem);
    info->solution = std::move(sol);
  }
  return next;
}

}  // namespace jointlimits
