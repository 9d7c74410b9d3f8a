#include "buqo/pnp.hpp"

#include "buqo/prox.hpp"

#include <cmath>
#include <ostream>
#include <random>

namespace buqo {

HEval eval_h(const InpaintingOperator& g, const Vec& x, double zeta) {
  require_size(x.size(), g.mask().n_pixels(), "eval_h");
  Linearization lin = g.linearize(x);
  const Vec r = x - lin.value;
  HEval out;
  out.value = 0.5 * zeta * r.squaredNorm();
  out.grad = zeta * (r - lin.pullback(r));
  out.gx = std::move(lin.value);
  return out;
}

Vec grad_h(const InpaintingOperator& g, const Vec& x, double zeta) { return eval_h(g, x, zeta).grad; }

BetaEstimate estimate_beta(const InpaintingOperator& g, const Vec& x_map, const BetaOptions& opts) {
  if (opts.count < 1) throw ConfigError("estimate_beta: perturbation count must be >= 1");
  if (!(opts.perturb_std >= 0.0)) throw DomainError("estimate_beta: perturbation std must be non-negative");
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vec base = g.apply(x_map);
  const Index n = base.size();

  BetaEstimate est;
  for (int i = 0; i < opts.count; ++i) {
    Vec z(n);
    for (Index p = 0; p < n; ++p) z[p] = base[p] + opts.perturb_std * normal(rng);
    const Vec g0 = grad_h(g, z, opts.zeta);
    if (!g0.allFinite()) throw NumericalError("estimate_beta: non-finite gradient");
    const double zn = z.norm();
    const double delta = 1e-4 * (zn > 0.0 ? zn : 1.0);

    Vec v(n);
    for (Index p = 0; p < n; ++p) v[p] = normal(rng);
    v.normalize();
    double norm = 0.0;
    for (int it = 0; it < opts.power.max_iter; ++it) {
      // v has unit norm, so delta = 1e-4 ||z|| / ||v||.
      const Vec hv = (grad_h(g, z + delta * v, opts.zeta) - g0) / delta;
      if (!hv.allFinite()) throw NumericalError("estimate_beta: non-finite Hessian-vector product");
      const double next = hv.norm();
      const bool done = std::abs(next - norm) < opts.power.tol * next;
      norm = next;
      if (next == 0.0 || done) break;
      v = hv / next;
    }
    est.sample_norms.push_back(norm);
  }
  double mx = 0.0;
  for (double s : est.sample_norms) mx = std::max(mx, s);
  est.beta = opts.safety * mx;
  return est;
}

bool PnpParams::admissible() const {
  return sigma > 0.0 && 1.0 / sigma - mu1 * norm_psi_sq - mu2 * norm_phi_sq > beta / 2.0;
}

PnpParams make_pnp_params(double beta, double zeta, double norm_psi_sq, double norm_phi_sq, double mu1,
                          double mu2) {
  if (!(beta >= 0.0)) throw DomainError("PnP: beta must be non-negative");
  if (!(zeta > 0.0)) throw DomainError("PnP: zeta must be positive");
  if (!(mu1 > 0.0 && mu2 > 0.0)) throw DomainError("PnP: dual steps must be positive");
  PnpParams p;
  p.beta = beta;
  p.zeta = zeta;
  p.mu1 = mu1;
  p.mu2 = mu2;
  p.norm_psi_sq = norm_psi_sq;
  p.norm_phi_sq = norm_phi_sq;
  p.sigma = 0.99 / (beta / 2.0 + mu1 * norm_psi_sq + mu2 * norm_phi_sq);
  return p;
}

void PnpTrace::write_csv(std::ostream& os) const {
  os << "iter,h_value,grad_norm,data_slack,l1_slack,rel_change\n";
  os.precision(17);
  for (std::size_t k = 0; k < size(); ++k) {
    os << iter[k] << ',' << h_value[k] << ',' << grad_norm[k] << ',' << data_slack[k] << ',' << l1_slack[k] << ','
       << rel_change[k] << '\n';
  }
}

PnpResult solve_pnp_buqo(const Vec& x_map, const CVec& y, const FourierOperator& phi, const LinearOperator& psi,
                         const CredibleRegion& region, const InpaintingOperator& g, const PnpParams& params,
                         const PnpOptions& opts) {
  require_size(x_map.size(), phi.in_size(), "solve_pnp_buqo: MAP");
  require_size(g.mask().n_pixels(), phi.in_size(), "solve_pnp_buqo: inpainting mask");
  require_size(y.size(), phi.measurements(), "solve_pnp_buqo: data");
  if (!params.admissible()) throw ConfigError("solve_pnp_buqo: stepsizes violate the primal-dual condition");

  const double mu1 = params.mu1, mu2 = params.mu2, sigma = params.sigma;
  Vec x = g.apply(x_map);
  Vec v1 = Vec::Zero(psi.out_size());
  CVec v2 = CVec::Zero(y.size());
  Vec psi_x = psi.apply(x);
  CVec phi_x = phi.forward(x);
  Vec psi_bar = psi_x;
  CVec phi_bar = phi_x;
  const Ball2<CVec> data_ball{y, region.epsilon};

  PnpResult res;
  res.x = x;
  for (int k = 0; k < opts.max_iter; ++k) {
    const HEval h = eval_h(g, x, params.zeta);
    const Vec v1t = v1 + mu1 * psi_bar;
    v1 = v1t - mu1 * project_l1_ball(v1t / mu1, region.l1_radius);
    const CVec v2t = v2 + mu2 * phi_bar;
    v2 = v2t - mu2 * project_l2_ball<CVec>(v2t / mu2, data_ball);
    const Vec x_tilde = project_box(x - sigma * h.grad - sigma * (psi.adjoint(v1) + phi.adjoint_complex(v2)), 0.0, 1.0);

    const double x_norm = x.norm();
    const double rel_change = (x_tilde - x).norm() / (x_norm > 0.0 ? x_norm : 1.0);
    if (!std::isfinite(rel_change) || !std::isfinite(h.value)) {
      throw NumericalError("solve_pnp_buqo: non-finite iterate at iteration " + std::to_string(k));
    }
    const Vec psi_xt = psi.apply(x_tilde);
    const CVec phi_xt = phi.forward(x_tilde);
    const Membership mem = credible_membership(x_tilde, phi_xt, psi_xt, region, y, opts.rel_tol);

    res.trace.iter.push_back(k);
    res.trace.h_value.push_back(h.value);
    res.trace.grad_norm.push_back(h.grad.norm());
    res.trace.data_slack.push_back(mem.data_slack);
    res.trace.l1_slack.push_back(mem.l1_slack);
    res.trace.rel_change.push_back(rel_change);
    res.x = x_tilde;
    res.iterations = k + 1;
    res.membership = mem;

    psi_bar = 2.0 * psi_xt - psi_x;
    phi_bar = 2.0 * phi_xt - phi_x;
    psi_x = psi_xt;
    phi_x = phi_xt;
    x = x_tilde;

    if (mem.inside && rel_change <= opts.tol) {
      res.converged = true;
      break;
    }
  }

  const HEval final_h = eval_h(g, res.x, params.zeta);
  res.gx = final_h.gx;
  res.h_value = final_h.value;
  res.grad_norm = final_h.grad.norm();
  return res;
}

double rho_alpha(const Vec& x_map, const Vec& x, const InpaintingOperator& g) {
  const double denom = (x_map - g.apply(x_map)).norm();
  if (!(denom > 0.0)) {
    throw DegenerateStructure("rho_alpha: the MAP is a fixed point of the inpainting operator (no structure)");
  }
  return std::max(0.0, (x - g.apply(x)).norm() / denom);
}

}  // namespace buqo
