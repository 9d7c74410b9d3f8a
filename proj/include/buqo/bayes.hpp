#pragma once

#include "buqo/common.hpp"
#include "buqo/operators.hpp"

#include <string_view>

namespace buqo {

/// Conservative credible region
///   {x in [0,1]^N : ||Phi x - y|| <= epsilon, ||Psi x||_1 <= eta_alpha / lambda}.
struct CredibleRegion {
  double epsilon = 0.0;
  double l1_radius = 0.0;
  double lambda = 1.0;
  double eta_alpha = 0.0;
  double alpha = 0.01;
  double box_lo = 0.0;
  double box_hi = 1.0;
};

/// Lower end of the admissible confidence interval, 4 exp(-N/3).
double alpha_lower_bound(Index n_pixels);

/// lambda ||Psi x_map||_1 + N (sqrt(16 log(3/alpha) / N) + 1). Assumes the MAP is
/// feasible, so the data and box indicators vanish.
double eta_alpha(double map_reg_value, Index n_pixels, double alpha);

CredibleRegion make_credible_region(const Vec& x_map, const LinearOperator& psi, double lambda, double epsilon,
                                    double alpha);

struct Membership {
  bool inside = false;
  double data_slack = 0.0;     // ||Phi x - y|| / epsilon
  double l1_slack = 0.0;       // ||Psi x||_1 / (eta_alpha / lambda)
  double box_violation = 0.0;  // max distance of a pixel outside [0, 1]
  double data_residual = 0.0;
  double l1_value = 0.0;
};

/// Membership test with relative tolerance on every constraint.
Membership in_credible_region(const Vec& x, const CredibleRegion& region, const FourierOperator& phi,
                              const LinearOperator& psi, const CVec& y, double rel_tol = 1e-3);

/// Same test from precomputed Phi x and Psi x.
Membership credible_membership(const Vec& x, const CVec& phi_x, const Vec& psi_x, const CredibleRegion& region,
                               const CVec& y, double rel_tol);

/// Outcome of a structure test. H0 ("the structure is absent") is never accepted.
enum class Decision { reject_h0, inconclusive };

std::string_view to_string(Decision d);

/// reject_h0 iff rho > tau. tau and alpha must lie in (0, 1).
Decision decide(double rho, double tau, double alpha);

}  // namespace buqo
