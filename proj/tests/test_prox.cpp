#include "buqo/prox.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace buqo;

namespace {

// Firm nonexpansiveness slack: <Pu - Pv, u - v> - ||Pu - Pv||^2 (must be >= -tol).
template <class P>
double worst_firmness(P proj, Index len, int trials, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  double worst = 1e300;
  for (int t = 0; t < trials; ++t) {
    const Vec u = oracle::randn(len, rng, scale), v = oracle::randn(len, rng, scale);
    const Vec pu = proj(u), pv = proj(v);
    worst = std::min(worst, (pu - pv).dot(u - v) - (pu - pv).squaredNorm());
  }
  return worst;
}

}  // namespace

TEST_CASE("l2 ball examples") {
  const Ball2<Vec> b{Vec::Zero(2), 5.0};
  Vec z(2);
  z << 6, 8;
  const Vec p = project_l2_ball(z, b);
  CHECK(p[0] == doctest::Approx(3.0));
  CHECK(p[1] == doctest::Approx(4.0));
  Vec in(2);
  in << 1, 2;
  CHECK(project_l2_ball(in, b) == in);
  CHECK_THROWS_AS(project_l2_ball(in, Ball2<Vec>{Vec::Zero(2), -1.0}), DomainError);
}

TEST_CASE("complex l2 ball: radius and direction") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    CVec c(7), z(7);
    for (Index i = 0; i < 7; ++i) {
      c[i] = Complex(oracle::randn(1, rng)[0], oracle::randn(1, rng)[0]);
      z[i] = Complex(5.0 * oracle::randn(1, rng)[0], 5.0 * oracle::randn(1, rng)[0]);
    }
    const double r = 0.5;
    const CVec p = project_l2_ball<CVec>(z, Ball2<CVec>{c, r});
    CHECK((p - c).norm() <= r * (1 + 1e-12));
    // Parallel: p - c = s (z - c) with s real and positive.
    const Complex s = (z - c).dot(p - c) / (z - c).squaredNorm();
    CHECK(std::abs(s.imag()) <= 1e-12);
    CHECK(((p - c) - s.real() * (z - c)).norm() <= 1e-12);
  }
}

TEST_CASE("l1 ball examples") {
  Vec a(2), b(2), c(3);
  a << 3, 0;
  b << 2, 1;
  c << 0.1, -0.2, 0.3;
  const Vec pa = project_l1_ball(a, 1.0), pb = project_l1_ball(b, 1.0);
  CHECK((pa - oracle::l1_projection_bisection(a, 1.0)).norm() <= 1e-10);
  CHECK((pb - oracle::l1_projection_bisection(b, 1.0)).norm() <= 1e-10);
  CHECK(pa[0] == doctest::Approx(1.0));
  CHECK(pa[1] == 0.0);
  CHECK(pb[0] == doctest::Approx(1.0));
  CHECK(pb[1] == 0.0);
  CHECK(l1_ball_threshold(b, 1.0) == doctest::Approx(1.0));
  CHECK(project_l1_ball(c, 1.0) == c);
  CHECK(l1_ball_threshold(c, 1.0) == 0.0);
  CHECK(project_l1_ball(c, 0.0).norm() == 0.0);
}

TEST_CASE("l1 projection matches the bisection oracle on 1000 vectors") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 64);
  std::uniform_real_distribution<double> frac(0.0, 1.2);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Vec z = oracle::randn(len(rng), rng, 3.0);
    const double r = frac(rng) * z.lpNorm<1>();
    worst = std::max(worst, (project_l1_ball(z, r) - oracle::l1_projection_bisection(z, r)).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("projections are idempotent and firmly nonexpansive") {
  std::mt19937_64 rng(7);
  const Vec center = oracle::randn(20, rng);
  const auto l2 = [&](const Vec& z) { return project_l2_ball(z, Ball2<Vec>{center, 1.5}); };
  const auto l1 = [](const Vec& z) { return project_l1_ball(z, 2.0); };
  const auto box = [](const Vec& z) { return project_box(z, 0.0, 1.0); };

  CHECK(worst_firmness(l2, 20, 500, 1, 2.0) >= -1e-10);
  CHECK(worst_firmness(l1, 20, 500, 2, 2.0) >= -1e-10);
  CHECK(worst_firmness(box, 20, 500, 3, 2.0) >= -1e-10);

  for (int t = 0; t < 100; ++t) {
    const Vec z = oracle::randn(20, rng, 3.0);
    CHECK((l2(l2(z)) - l2(z)).norm() <= 1e-10);
    CHECK((l1(l1(z)) - l1(z)).norm() <= 1e-10);
    CHECK(box(box(z)) == box(z));
  }
}

TEST_CASE("box and soft threshold examples") {
  Vec z(3);
  z << -1, 0.5, 2;
  const Vec p = project_box(z, 0.0, 1.0);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 0.5);
  CHECK(p[2] == 1.0);
  CHECK(project_box(p, 0.0, 1.0) == p);

  Vec s(3);
  s << 2, -0.5, 0.1;
  const Vec st = soft_threshold(s, 1.0);
  CHECK(st[0] == 1.0);
  CHECK(st[1] == 0.0);
  CHECK(st[2] == 0.0);
  CHECK(soft_threshold(s, 0.0) == s);

  // Moreau: z = prox_{t|.|_1}(z) + t * Proj_{B_inf(1)}(z / t).
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const Vec v = oracle::randn(15, rng, 2.0);
    const double t = 0.7;
    CHECK(soft_threshold(v, t).lpNorm<1>() <= v.lpNorm<1>());
    CHECK((soft_threshold(v, t) + t * project_box(v / t, -1.0, 1.0) - v).norm() <= 1e-12);
  }
}
