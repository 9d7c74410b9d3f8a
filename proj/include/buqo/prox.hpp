#pragma once

#include "buqo/common.hpp"

namespace buqo {

template <class V>
struct Ball2 {
  V center;
  double radius = 0.0;
};

struct Ball1 {
  double radius = 0.0;  // centered at zero
};

/// Projection onto {z : ||z - c||_2 <= r}. Complex vectors are treated as real
/// vectors of doubled length.
template <class V>
V project_l2_ball(const V& z, const Ball2<V>& ball) {
  require_size(z.size(), ball.center.size(), "project_l2_ball");
  if (ball.radius < 0.0) throw DomainError("project_l2_ball: negative radius");
  const double dist = (z - ball.center).norm();
  if (dist <= ball.radius) return z;
  return ball.center + (ball.radius / dist) * (z - ball.center);
}

/// Euclidean projection onto {x : ||x||_1 <= radius}, sort-based threshold search.
Vec project_l1_ball(const Vec& z, double radius);

inline Vec project_l1_ball(const Vec& z, const Ball1& ball) { return project_l1_ball(z, ball.radius); }

/// Componentwise clamp to [lo, hi].
Vec project_box(const Vec& z, double lo, double hi);

/// sign(z) * max(|z| - t, 0), the prox of t*||.||_1.
Vec soft_threshold(const Vec& z, double t);

/// The l1 threshold theta* used by project_l1_ball (0 when z is already inside).
double l1_ball_threshold(const Vec& z, double radius);

}  // namespace buqo
