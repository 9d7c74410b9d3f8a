#pragma once

#include "buqo/common.hpp"
#include "buqo/operators.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace buqo {

/// Condat-Vu stepsizes for the MAP problem.
struct PdStepsizes {
  double mu1 = 1.0;  // dual step, Psi branch
  double mu2 = 1.0;  // dual step, Phi branch
  double sigma = 0.0;
  double norm_psi_sq = 0.0;
  double norm_phi_sq = 0.0;

  /// sigma (mu1 ||Psi||^2 + mu2 ||Phi||^2) < 1
  bool admissible() const { return sigma > 0.0 && sigma * (mu1 * norm_psi_sq + mu2 * norm_phi_sq) < 1.0; }
};

/// sigma = 0.99 / (mu1 ||Psi||^2 + mu2 ||Phi||^2)
PdStepsizes make_pd_stepsizes(double norm_psi_sq, double norm_phi_sq, double mu1 = 1.0, double mu2 = 1.0);

/// Default MAP steps: mu1 = lambda, mu2 = 100 lambda. Scaling both duals with
/// lambda makes the iterates independent of lambda, which only rescales the
/// objective.
PdStepsizes map_stepsizes(double lambda, double norm_psi_sq, double norm_phi_sq);

struct SolverTrace {
  std::vector<int> iter;
  std::vector<double> data_residual;
  std::vector<double> reg_value;
  std::vector<double> rel_change;

  std::size_t size() const { return iter.size(); }
  void write_csv(std::ostream& os) const;
};

struct MapOptions {
  double tol = 1e-5;
  int max_iter = 20000;
  /// Data residual must be within epsilon (1 + feas_tol) before stopping.
  double feas_tol = 1e-3;
};

struct MapResult {
  Vec x;
  SolverTrace trace;
  int iterations = 0;
  bool converged = false;
};

/// Primal-dual solve of
///   min_x  lambda ||Psi x||_1   s.t.  ||Phi x - y|| <= epsilon,  x in [0,1]^N.
/// x0 defaults to Phi^T y clamped to [0, 1].
MapResult solve_map(const CVec& y, const FourierOperator& phi, const LinearOperator& psi, double lambda,
                    double epsilon, const PdStepsizes& steps, const MapOptions& opts = {},
                    std::optional<Vec> x0 = std::nullopt);

}  // namespace buqo
