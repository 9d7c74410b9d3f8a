#include "buqo/map_solver.hpp"

#include "buqo/prox.hpp"

#include <cmath>
#include <ostream>

namespace buqo {

PdStepsizes make_pd_stepsizes(double norm_psi_sq, double norm_phi_sq, double mu1, double mu2) {
  if (!(mu1 > 0.0 && mu2 > 0.0)) throw ConfigError("stepsizes: dual steps must be positive");
  PdStepsizes s;
  s.mu1 = mu1;
  s.mu2 = mu2;
  s.norm_psi_sq = norm_psi_sq;
  s.norm_phi_sq = norm_phi_sq;
  s.sigma = 0.99 / (mu1 * norm_psi_sq + mu2 * norm_phi_sq);
  return s;
}

PdStepsizes map_stepsizes(double lambda, double norm_psi_sq, double norm_phi_sq) {
  if (!(lambda > 0.0)) throw DomainError("MAP: lambda must be positive");
  return make_pd_stepsizes(norm_psi_sq, norm_phi_sq, lambda, 100.0 * lambda);
}

void SolverTrace::write_csv(std::ostream& os) const {
  os << "iter,data_residual,reg_value,rel_change\n";
  os.precision(17);
  for (std::size_t k = 0; k < size(); ++k) {
    os << iter[k] << ',' << data_residual[k] << ',' << reg_value[k] << ',' << rel_change[k] << '\n';
  }
}

MapResult solve_map(const CVec& y, const FourierOperator& phi, const LinearOperator& psi, double lambda,
                    double epsilon, const PdStepsizes& steps, const MapOptions& opts, std::optional<Vec> x0) {
  require_size(y.size(), phi.measurements(), "solve_map: data");
  require_size(psi.in_size(), phi.in_size(), "solve_map: Psi domain");
  if (!steps.admissible()) {
    throw ConfigError("solve_map: stepsizes violate sigma (mu1 ||Psi||^2 + mu2 ||Phi||^2) < 1");
  }
  if (!(lambda > 0.0)) throw DomainError("solve_map: lambda must be positive");
  if (!(epsilon >= 0.0)) throw DomainError("solve_map: epsilon must be non-negative");

  const double mu1 = steps.mu1, mu2 = steps.mu2, sigma = steps.sigma;
  Vec x = x0 ? *x0 : project_box(phi.adjoint_complex(y), 0.0, 1.0);
  require_size(x.size(), phi.in_size(), "solve_map: x0");

  Vec v1 = Vec::Zero(psi.out_size());
  CVec v2 = CVec::Zero(y.size());
  // Duals see the extrapolated point 2 x~ - x; the primal step starts from the
  // last projected point. Phi and Psi of both are carried by linearity.
  Vec psi_x = psi.apply(x);
  CVec phi_x = phi.forward(x);
  Vec psi_bar = psi_x;
  CVec phi_bar = phi_x;
  const Ball2<CVec> data_ball{y, epsilon};

  MapResult res;
  res.x = x;
  for (int k = 0; k < opts.max_iter; ++k) {
    // Dual ascent, Psi branch: Moreau decomposition of the prox of (lambda/mu1) ||.||_1.
    const Vec v1_tilde = v1 + mu1 * psi_bar;
    v1 = v1_tilde - mu1 * soft_threshold(v1_tilde / mu1, lambda / mu1);
    // Dual ascent, data-fidelity branch.
    const CVec v2_tilde = v2 + mu2 * phi_bar;
    v2 = v2_tilde - mu2 * project_l2_ball<CVec>(v2_tilde / mu2, data_ball);
    // Primal step.
    const Vec x_tilde = project_box(x - sigma * (psi.adjoint(v1) + phi.adjoint_complex(v2)), 0.0, 1.0);

    const CVec phi_xt = phi.forward(x_tilde);
    const Vec psi_xt = psi.apply(x_tilde);
    const double x_norm = x.norm();
    const double rel_change = (x_tilde - x).norm() / (x_norm > 0.0 ? x_norm : 1.0);
    const double residual = (phi_xt - y).norm();
    if (!std::isfinite(rel_change) || !std::isfinite(residual)) {
      throw NumericalError("solve_map: non-finite iterate at iteration " + std::to_string(k));
    }
    res.trace.iter.push_back(k);
    res.trace.data_residual.push_back(residual);
    res.trace.reg_value.push_back(lambda * psi_xt.lpNorm<1>());
    res.trace.rel_change.push_back(rel_change);
    res.x = x_tilde;
    res.iterations = k + 1;

    phi_bar = 2.0 * phi_xt - phi_x;
    psi_bar = 2.0 * psi_xt - psi_x;
    phi_x = phi_xt;
    psi_x = psi_xt;
    x = x_tilde;

    if (rel_change <= opts.tol && residual <= epsilon * (1.0 + opts.feas_tol)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace buqo
