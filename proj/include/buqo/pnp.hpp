#pragma once

#include "buqo/bayes.hpp"
#include "buqo/common.hpp"
#include "buqo/inpaint.hpp"
#include "buqo/operators.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace buqo {

/// h(x) = (zeta/2) ||x - G(x)||^2 and its gradient zeta (r - J_G(x)^T r), r = x - G(x).
struct HEval {
  double value = 0.0;
  Vec grad;
  Vec gx;
};

HEval eval_h(const InpaintingOperator& g, const Vec& x, double zeta);
Vec grad_h(const InpaintingOperator& g, const Vec& x, double zeta);

struct BetaOptions {
  double zeta = 1.0;
  double perturb_std = 0.01;
  int count = 4;
  std::uint64_t seed = 0;
  PowerOptions power{};
  double safety = 1.1;
};

struct BetaEstimate {
  double beta = 0.0;                 // safety * max of samples
  std::vector<double> sample_norms;  // Hessian norm at each perturbed point
};

/// Lipschitz estimate of grad h from finite-difference Hessian power iterations
/// at I Gaussian perturbations of G(x_map).
BetaEstimate estimate_beta(const InpaintingOperator& g, const Vec& x_map, const BetaOptions& opts);

struct PnpParams {
  double zeta = 1.0;
  double beta = 0.0;
  double mu1 = 0.1, mu2 = 1.0;
  double sigma = 0.0;
  double norm_psi_sq = 0.0, norm_phi_sq = 0.0;

  /// 1/sigma - mu1 ||Psi||^2 - mu2 ||Phi||^2 > beta / 2
  bool admissible() const;
};

/// sigma = 0.99 / (beta/2 + mu1 ||Psi||^2 + mu2 ||Phi||^2)
PnpParams make_pnp_params(double beta, double zeta, double norm_psi_sq, double norm_phi_sq, double mu1 = 0.1,
                          double mu2 = 1.0);

struct PnpOptions {
  double tol = 1e-3;  // relative change ||x+ - x|| <= tol ||x||
  int max_iter = 5000;
  double rel_tol = 1e-3;  // credible-region membership
};

struct PnpTrace {
  std::vector<int> iter;
  std::vector<double> h_value;
  std::vector<double> grad_norm;
  std::vector<double> data_slack;
  std::vector<double> l1_slack;
  std::vector<double> rel_change;

  std::size_t size() const { return iter.size(); }
  void write_csv(std::ostream& os) const;
};

struct PnpResult {
  Vec x;   // x double-dagger
  Vec gx;  // G(x)
  int iterations = 0;
  bool converged = false;
  Membership membership;
  double h_value = 0.0;
  double grad_norm = 0.0;
  PnpTrace trace;
};

/// Primal-dual minimization of h over the credible region, started at G(x_map).
PnpResult solve_pnp_buqo(const Vec& x_map, const CVec& y, const FourierOperator& phi, const LinearOperator& psi,
                         const CredibleRegion& region, const InpaintingOperator& g, const PnpParams& params,
                         const PnpOptions& opts = {});

/// ||x - G(x)|| / ||x_map - G(x_map)||. Throws DegenerateStructure if the MAP
/// is a fixed point of G.
double rho_alpha(const Vec& x_map, const Vec& x, const InpaintingOperator& g);

}  // namespace buqo
