#include "buqo/prox.hpp"

#include <algorithm>
#include <functional>
#include <vector>

namespace buqo {

double l1_ball_threshold(const Vec& z, double radius) {
  if (radius < 0.0) throw DomainError("project_l1_ball: negative radius");
  if (z.lpNorm<1>() <= radius) return 0.0;
  if (radius == 0.0) return z.cwiseAbs().maxCoeff();
  std::vector<double> u(std::size_t(z.size()));
  for (Index i = 0; i < z.size(); ++i) u[std::size_t(i)] = std::abs(z[i]);
  std::sort(u.begin(), u.end(), std::greater<>());
  // theta = (sum_{k<=rho} u_k - r) / rho for the largest rho with u_rho > theta.
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumsum += u[k];
    const double t = (cumsum - radius) / double(k + 1);
    if (u[k] > t) theta = t;
  }
  return std::max(theta, 0.0);
}

Vec project_l1_ball(const Vec& z, double radius) {
  const double theta = l1_ball_threshold(z, radius);
  if (radius == 0.0) return Vec::Zero(z.size());
  if (theta == 0.0) return z;
  return soft_threshold(z, theta);
}

Vec project_box(const Vec& z, double lo, double hi) {
  if (lo > hi) throw DomainError("project_box: lo > hi");
  return z.cwiseMax(lo).cwiseMin(hi);
}

Vec soft_threshold(const Vec& z, double t) {
  if (t < 0.0) throw DomainError("soft_threshold: negative threshold");
  Vec out(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    const double a = std::abs(z[i]) - t;
    out[i] = a > 0.0 ? std::copysign(a, z[i]) : 0.0;
  }
  return out;
}

}  // namespace buqo
