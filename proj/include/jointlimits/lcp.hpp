#pragma once

#include "jointlimits/types.hpp"

#include <stdexcept>
#include <string>

namespace jointlimits {

/// KKT residuals of a candidate LCP solution (all zero at an exact solution).
struct LcpResiduals {
  double equation = 0.0;         // max |v - (A f + b)|
  double f_negativity = 0.0;     // max(0, -min f)
  double v_negativity = 0.0;     // max(0, -min v)
  double complementarity = 0.0;  // max |v_i f_i|

  double worst() const;
};

LcpResiduals lcp_residuals(const MatX& A, const VecX& b, const VecX& f, const VecX& v);

struct LcpOptions {
  int max_iterations = 200;     // projected Gauss-Seidel sweeps
  double tolerance = 1e-10;     // per-row change that ends the sweeps
  double kkt_tolerance = 1e-8;  // accepted residual, scaled by the problem size
  int max_pivots = 1024;        // principal pivoting steps after the sweeps
};

struct LcpSolution {
  VecX f;  // impulses, >= 0
  VecX v;  // A f + b, >= 0
  int iterations = 0;
  int pivots = 0;
};

class LcpError : public std::runtime_error {
 public:
  LcpError(const std::string& what, const LcpResiduals& r) : std::runtime_error(what), residuals_(r) {}
  const LcpResiduals& residuals() const { return residuals_; }

 private:
  LcpResiduals residuals_;
};

/// Finds f >= 0 with v = A f + b >= 0 and f.v = 0 for symmetric PSD A.
/// Projected Gauss-Seidel produces the starting active set; principal
/// pivoting on that set then resolves the solution to machine precision.
LcpSolution solve_lcp(const MatX& A, const VecX& b, const LcpOptions& options = {});

}  // namespace jointlimits
