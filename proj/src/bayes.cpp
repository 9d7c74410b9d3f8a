#include "buqo/bayes.hpp"

#include <cmath>
#include <limits>

namespace buqo {

double alpha_lower_bound(Index n_pixels) { return 4.0 * std::exp(-double(n_pixels) / 3.0); }

double eta_alpha(double map_reg_value, Index n_pixels, double alpha) {
  if (n_pixels < 1) throw DomainError("eta_alpha: N must be positive");
  const double lo = alpha_lower_bound(n_pixels);
  if (!(alpha > lo && alpha < 1.0)) {
    throw DomainError("eta_alpha: alpha=" + std::to_string(alpha) + " outside (" + std::to_string(lo) + ", 1)");
  }
  const double N = double(n_pixels);
  return map_reg_value + N * (std::sqrt(16.0 * std::log(3.0 / alpha) / N) + 1.0);
}

CredibleRegion make_credible_region(const Vec& x_map, const LinearOperator& psi, double lambda, double epsilon,
                                    double alpha) {
  if (!(lambda > 0.0)) throw DomainError("credible region: lambda must be positive");
  if (!(epsilon >= 0.0)) throw DomainError("credible region: epsilon must be non-negative");
  CredibleRegion r;
  r.epsilon = epsilon;
  r.lambda = lambda;
  r.alpha = alpha;
  r.eta_alpha = eta_alpha(lambda * psi.apply(x_map).lpNorm<1>(), x_map.size(), alpha);
  r.l1_radius = r.eta_alpha / lambda;
  return r;
}

namespace {

double ratio(double value, double bound) {
  if (bound > 0.0) return value / bound;
  return value == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

Membership credible_membership(const Vec& x, const CVec& phi_x, const Vec& psi_x, const CredibleRegion& region,
                               const CVec& y, double rel_tol) {
  Membership m;
  m.data_residual = (phi_x - y).norm();
  m.l1_value = psi_x.lpNorm<1>();
  m.data_slack = ratio(m.data_residual, region.epsilon);
  m.l1_slack = ratio(m.l1_value, region.l1_radius);
  const double below = region.box_lo - x.minCoeff();
  const double above = x.maxCoeff() - region.box_hi;
  m.box_violation = std::max({0.0, below, above});
  m.inside = m.data_residual <= region.epsilon * (1.0 + rel_tol) &&
             m.l1_value <= region.l1_radius * (1.0 + rel_tol) && m.box_violation <= rel_tol;
  return m;
}

Membership in_credible_region(const Vec& x, const CredibleRegion& region, const FourierOperator& phi,
                              const LinearOperator& psi, const CVec& y, double rel_tol) {
  require_size(x.size(), phi.in_size(), "in_credible_region");
  return credible_membership(x, phi.forward(x), psi.apply(x), region, y, rel_tol);
}

std::string_view to_string(Decision d) { return d == Decision::reject_h0 ? "reject_H0" : "inconclusive"; }

Decision decide(double rho, double tau, double alpha) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("decide: tau must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("decide: alpha must lie in (0, 1)");
  if (!(rho >= 0.0)) throw DomainError("decide: rho must be a non-negative number");
  return rho > tau ? Decision::reject_h0 : Decision::inconclusive;
}

}  // namespace buqo
