#include "jointlimits/lcp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace jointlimits {

namespace {

double scale_of(const MatX& A, const VecX& b) {
  double s = 1.0;
  if (A.size() > 0) s = std::max(s, A.cwiseAbs().maxCoeff());
  if (b.size() > 0) s = std::max(s, b.cwiseAbs().maxCoeff());
  return s;
}

/// Solves A_SS f_S = -b_S with f_N = 0.
VecX solve_on_set(const MatX& A, const VecX& b, const std::vector<bool>& in_set) {
  const auto m = b.size();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (in_set[i]) idx.push_back(i);
  }
  VecX f = VecX::Zero(m);
  if (idx.empty()) return f;
  const auto k = static_cast<Eigen::Index>(idx.size());
  MatX Ass(k, k);
  VecX bs(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    bs[r] = -b[idx[r]];
    for (Eigen::Index c = 0; c < k; ++c) Ass(r, c) = A(idx[r], idx[c]);
  }
  Eigen::LDLT<MatX> ldlt(Ass);
  VecX fs;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      ldlt.vectorD().minCoeff() > 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
    fs = ldlt.solve(bs);
  } else {
    // Rank-deficient block: minimum-norm least-squares solution.
    fs = Ass.completeOrthogonalDecomposition().solve(bs);
  }
  for (Eigen::Index r = 0; r < k; ++r) f[idx[r]] = fs[r];
  return f;
}

}  // namespace

double LcpResiduals::worst() const {
  return std::max({equation, f_negativity, v_negativity, complementarity});
}

LcpResiduals lcp_residuals(const MatX& A, const VecX& b, const VecX& f, const VecX& v) {
  LcpResiduals r;
  if (b.size() == 0) return r;
  r.equation = (v - (A * f + b)).cwiseAbs().maxCoeff();
  r.f_negativity = std::max(0.0, -f.minCoeff());
  r.v_negativity = std::max(0.0, -v.minCoeff());
  r.complementarity = v.cwiseProduct(f).cwiseAbs().maxCoeff();
  return r;
}

LcpSolution solve_lcp(const MatX& A, const VecX& b, const LcpOptions& options) {
  const auto m = b.size();
  require(A.rows() == m && A.cols() == m, "LCP matrix and vector sizes disagree");
  LcpSolution sol;
  sol.f = VecX::Zero(m);
  sol.v = b;
  if (m == 0) return sol;

  const double tol = options.kkt_tolerance * scale_of(A, b);

  // Projected Gauss-Seidel.
  VecX& f = sol.f;
  for (int it = 0; it < options.max_iterations; ++it) {
    double max_change = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double aii = A(i, i);
      if (aii <= 0.0) continue;
      const double r = A.row(i).dot(f) + b[i];
      const double next = std::max(0.0, f[i] - r / aii);
      max_change = std::max(max_change, std::abs(next - f[i]));
      f[i] = next;
    }
    sol.iterations = it + 1;
    if (max_change <= options.tolerance) break;
  }
  sol.v = A * f + b;
  if (lcp_residuals(A, b, sol.f, sol.v).worst() <= tol * 1e-2) return sol;

  // Principal pivoting seeded with the Gauss-Seidel active set. Block
  // exchanges while the infeasibility count drops, then Murty's single
  // least-index exchange for the remaining pivots.
  std::vector<bool> in_set(m);
  for (Eigen::Index i = 0; i < m; ++i) in_set[i] = f[i] > 0.0 || sol.v[i] < 0.0;
  std::size_t best_infeasible = static_cast<std::size_t>(m) + 1;
  int block_budget = 3;
  VecX best_f = sol.f;
  double best_worst = lcp_residuals(A, b, sol.f, sol.v).worst();
  for (int p = 0; p < options.max_pivots; ++p) {
    sol.pivots = p + 1;
    VecX cand = solve_on_set(A, b, in_set);
    VecX v = A * cand + b;
    std::vector<Eigen::Index> bad;
    for (Eigen::Index i = 0; i < m; ++i) {
      if ((in_set[i] && cand[i] < -tol * 1e-3) || (!in_set[i] && v[i] < -tol * 1e-3)) bad.push_back(i);
    }
    if (bad.empty()) {
      // Clip round-off.
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!in_set[i] || cand[i] < 0.0) cand[i] = 0.0;
      }
      sol.f = cand;
      sol.v = A * cand + b;
      // Rows in the set hold with equality; keep round-off out of v.
      for (Eigen::Index i = 0; i < m; ++i) {
        if (in_set[i]) sol.v[i] = 0.0;
      }
      break;
    }
    const double w = lcp_residuals(A, b, cand.cwiseMax(0.0), A * cand.cwiseMax(0.0) + b).worst();
    if (w < best_worst) {
      best_worst = w;
      best_f = cand.cwiseMax(0.0);
    }
    if (block_budget > 0) {
      if (bad.size() < best_infeasible) {
        best_infeasible = bad.size();
        block_budget = 3;
      } else {
        --block_budget;
      }
    }
    if (block_budget > 0) {
      for (auto i : bad) in_set[i] = !in_set[i];
    } else {
      in_set[bad.front()] = !in_set[bad.front()];
    }
    if (p + 1 == options.max_pivots) {
      sol.f = best_f;
      sol.v = A * best_f + b;
    }
  }

  const LcpResiduals res = lcp_residuals(A, b, sol.f, sol.v);
  if (res.worst() > tol) {
    std::ostringstream msg;
    msg << "LCP did not converge (" << m << " rows): equation " << res.equation << ", f<0 " << res.f_negativity
        << ", v<0 " << res.v_negativity << ", complementarity " << res.complementarity;
    throw LcpError(msg.str(), res);
  }
  return sol;
}

}  // namespace jointlimits
