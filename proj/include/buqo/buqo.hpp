#pragma once

#include "buqo/bayes.hpp"
#include "buqo/common.hpp"
#include "buqo/inpaint.hpp"
#include "buqo/operators.hpp"

#include <memory>
#include <vector>

namespace buqo {

/// Parameters of the two-image problem: x_C in the credible region, x_S in
///   S = {x in [0,1]^N : Lbar x in [-tau, tau]^{N_M}, M x in B2(mu, theta)}.
struct BuqoParams {
  double gamma = 1.0;
  double tau_box = 0.01;
  Vec mu_center;
  double theta = 0.0;
  double mu11 = 0.1, mu12 = 0.1, mu21 = 0.1, mu22 = 0.1;
  double sigma = 0.0;
  OperatorPtr lbar;   // M - L o M^c
  OperatorPtr m_op;   // M
  std::shared_ptr<const StructureMask> mask;
  Vec x_s0;           // complement of the MAP, mask filled by L
  double norm_psi_sq = 0.0, norm_phi_sq = 0.0, norm_lbar_sq = 0.0;

  /// 1/sigma - mu11 ||Psi||^2 - mu12 ||Phi||^2 - mu21 ||Lbar||^2 - mu22 > gamma / 2
  bool admissible() const;
  /// Recompute sigma with a 1% margin after changing gamma or a dual step.
  void refresh_sigma();
};

BuqoParams default_buqo_params(const Vec& x_map, const OnionInpainter& inpainter, double norm_psi_sq,
                               double norm_phi_sq, const PowerOptions& power = {});

struct BuqoOptions {
  double tol = 1e-3;      // joint relative change
  int max_iter = 20000;
  double rel_tol = 1e-3;  // membership tolerance for both sets
  double test_tau = 0.02;
};

struct BuqoTrace {
  std::vector<int> iter;
  std::vector<double> distance;
  std::vector<double> data_slack;
  std::vector<double> l1_slack;
  std::vector<double> rel_change;
};

struct BuqoResult {
  Vec x_c;
  Vec x_s;
  double distance = 0.0;
  double rho = 0.0;
  Decision decision = Decision::inconclusive;
  int iterations = 0;
  bool converged = false;
  Membership membership;     // of x_c
  double lbar_inf = 0.0;     // ||Lbar x_s||_inf
  double center_dist = 0.0;  // ||M x_s - mu||
  BuqoTrace trace;
};

BuqoResult solve_buqo(const Vec& x_map, const CVec& y, const FourierOperator& phi, const LinearOperator& psi,
                      const CredibleRegion& region, const BuqoParams& params, const BuqoOptions& opts = {});

}  // namespace buqo
