#include "buqo/buqo.hpp"

#include "buqo/prox.hpp"

#include <cmath>

namespace buqo {

namespace {
constexpr double kNormM2 = 1.0;  // M is a row selection
}

bool BuqoParams::admissible() const {
  const double lhs = 1.0 / sigma - mu11 * norm_psi_sq - mu12 * norm_phi_sq - mu21 * norm_lbar_sq - mu22 * kNormM2;
  return sigma > 0.0 && lhs > gamma / 2.0;
}

void BuqoParams::refresh_sigma() {
  if (!(gamma > 0.0)) throw DomainError("BUQO: gamma must be positive");
  sigma = 0.99 / (gamma / 2.0 + mu11 * norm_psi_sq + mu12 * norm_phi_sq + mu21 * norm_lbar_sq + mu22 * kNormM2);
}

BuqoParams default_buqo_params(const Vec& x_map, const OnionInpainter& inpainter, double norm_psi_sq,
                               double norm_phi_sq, const PowerOptions& power) {
  const StructureMask& mask = inpainter.mask();
  require_size(x_map.size(), mask.n_pixels(), "default_buqo_params");
  if (mask.n_m() == 0) throw DegenerateStructure("BUQO: the structure mask is empty");

  BuqoParams p;
  p.mask = std::make_shared<const StructureMask>(mask);
  p.m_op = std::make_shared<MaskingOperator>(p.mask, false);
  auto mc_op = std::make_shared<MaskingOperator>(p.mask, true);
  p.lbar = std::make_shared<DifferenceOperator>(p.m_op, std::make_shared<ComposedOperator>(inpainter.as_operator(), mc_op));
  p.x_s0 = inpainter.apply(x_map);
  p.mu_center = mask.restrict(p.x_s0);
  p.theta = 0.1 * (mask.restrict(x_map) - p.mu_center).norm();
  p.norm_psi_sq = norm_psi_sq;
  p.norm_phi_sq = norm_phi_sq;
  const double lbar = spectral_norm(*p.lbar, power);
  p.norm_lbar_sq = lbar * lbar;
  p.refresh_sigma();
  return p;
}

BuqoResult solve_buqo(const Vec& x_map, const CVec& y, const FourierOperator& phi, const LinearOperator& psi,
                      const CredibleRegion& region, const BuqoParams& params, const BuqoOptions& opts) {
  require_size(x_map.size(), phi.in_size(), "solve_buqo: MAP");
  require_size(y.size(), phi.measurements(), "solve_buqo: data");
  if (!params.lbar || !params.m_op || !params.mask) throw ConfigError("solve_buqo: parameters not initialized");
  require_size(params.x_s0.size(), x_map.size(), "solve_buqo: x_s0");
  if (!params.admissible()) throw ConfigError("solve_buqo: stepsizes violate the primal-dual condition");

  const double g = params.gamma, sigma = params.sigma;
  const double gs = g * sigma;
  const LinearOperator& lbar = *params.lbar;
  const StructureMask& mask = *params.mask;

  Vec xc = x_map;
  Vec xs = params.x_s0;
  Vec v1 = Vec::Zero(psi.out_size());
  CVec v2 = CVec::Zero(y.size());
  Vec u1 = Vec::Zero(lbar.out_size());
  Vec u2 = Vec::Zero(mask.n_m());
  const Ball2<CVec> data_ball{y, region.epsilon};
  const Ball2<Vec> center_ball{params.mu_center, params.theta};

  // Duals see the extrapolated points; primal steps start from the last projected ones.
  Vec psi_xc = psi.apply(xc), psi_bar = psi_xc;
  CVec phi_xc = phi.forward(xc), phi_bar = phi_xc;
  Vec lbar_xs = lbar.apply(xs), lbar_bar = lbar_xs;
  Vec m_xs = mask.restrict(xs), m_bar = m_xs;

  const double denom = (x_map - params.x_s0).norm();
  BuqoResult res;
  res.x_c = xc;
  res.x_s = xs;
  for (int k = 0; k < opts.max_iter; ++k) {
    // x_C branch: credible-region constraints.
    const Vec v1t = v1 + params.mu11 * psi_bar;
    v1 = v1t - params.mu11 * project_l1_ball(v1t / params.mu11, region.l1_radius);
    const CVec v2t = v2 + params.mu12 * phi_bar;
    v2 = v2t - params.mu12 * project_l2_ball<CVec>(v2t / params.mu12, data_ball);
    const Vec xc_t =
        project_box((1.0 - gs) * xc + gs * xs - sigma * (psi.adjoint(v1) + phi.adjoint_complex(v2)), 0.0, 1.0);

    // x_S branch: structure-free constraints.
    const Vec u1t = u1 + params.mu21 * lbar_bar;
    u1 = u1t - params.mu21 * project_box(u1t / params.mu21, -params.tau_box, params.tau_box);
    const Vec u2t = u2 + params.mu22 * m_bar;
    u2 = u2t - params.mu22 * project_l2_ball<Vec>(u2t / params.mu22, center_ball);
    const Vec xs_t =
        project_box((1.0 - gs) * xs + gs * xc - sigma * (lbar.adjoint(u1) + mask.embed(u2)), 0.0, 1.0);

    const double change = std::sqrt((xc_t - xc).squaredNorm() + (xs_t - xs).squaredNorm());
    const double scale = std::sqrt(xc.squaredNorm() + xs.squaredNorm());
    const double rel_change = change / (scale > 0.0 ? scale : 1.0);
    if (!std::isfinite(rel_change)) {
      throw NumericalError("solve_buqo: non-finite iterate at iteration " + std::to_string(k));
    }

    const Vec psi_xct = psi.apply(xc_t);
    const CVec phi_xct = phi.forward(xc_t);
    const Vec lbar_xst = lbar.apply(xs_t);
    const Vec m_xst = mask.restrict(xs_t);
    const Membership mem = credible_membership(xc_t, phi_xct, psi_xct, region, y, opts.rel_tol);
    const double lbar_inf = lbar_xst.size() ? lbar_xst.lpNorm<Eigen::Infinity>() : 0.0;
    const double center_dist = (m_xst - params.mu_center).norm();

    res.x_c = xc_t;
    res.x_s = xs_t;
    res.iterations = k + 1;
    res.membership = mem;
    res.lbar_inf = lbar_inf;
    res.center_dist = center_dist;
    res.trace.iter.push_back(k);
    res.trace.distance.push_back((xc_t - xs_t).norm());
    res.trace.data_slack.push_back(mem.data_slack);
    res.trace.l1_slack.push_back(mem.l1_slack);
    res.trace.rel_change.push_back(rel_change);

    psi_bar = 2.0 * psi_xct - psi_xc;
    phi_bar = 2.0 * phi_xct - phi_xc;
    lbar_bar = 2.0 * lbar_xst - lbar_xs;
    m_bar = 2.0 * m_xst - m_xs;
    psi_xc = psi_xct;
    phi_xc = phi_xct;
    lbar_xs = lbar_xst;
    m_xs = m_xst;
    xc = xc_t;
    xs = xs_t;

    // Absolute floor so that a zero radius (structure-free MAP) can be met.
    const bool in_s = lbar_inf <= params.tau_box * (1.0 + opts.rel_tol) + 1e-12 &&
                      center_dist <= params.theta * (1.0 + opts.rel_tol) + 1e-12;
    if (rel_change <= opts.tol && mem.inside && in_s) {
      res.converged = true;
      break;
    }
  }

  res.distance = (res.x_c - res.x_s).norm();
  res.rho = denom > 0.0 ? res.distance / denom : 0.0;
  res.decision = decide(res.rho, opts.test_tau, region.alpha);
  return res;
}

}  // namespace buqo
