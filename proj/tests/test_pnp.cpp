#include "buqo/map_solver.hpp"
#include "buqo/pnp.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace buqo;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = BUQO_FIXTURES;

struct Named {
  std::string name;
  InpaintingPtr g;
};

std::vector<Named> all_inpainters(std::shared_ptr<const StructureMask> m) {
  return {{"onion", std::make_shared<OnionInpainter>(m)},
          {"harmonic", std::make_shared<HarmonicInpainter>(m)},
          {"cnn-zero", std::make_shared<CnnInpainter>(
                           std::make_shared<const CnnWeights>(cnn_load(kFixtures / "networks" / "zero.gdnw")), m)},
          {"cnn-random", std::make_shared<CnnInpainter>(
                             std::make_shared<const CnnWeights>(cnn_load(kFixtures / "networks" / "random.gdnw")), m)}};
}

/// Worst relative gap between <grad h(x), v> and central differences of h.
double worst_gradient_gap(const InpaintingOperator& g, const Vec& x, double zeta, int directions, double eps,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Vec grad = grad_h(g, x, zeta);
  const auto h = [&](const Vec& z) { return eval_h(g, z, zeta).value; };
  double worst = 0.0;
  for (int k = 0; k < directions; ++k) {
    Vec v = oracle::randn(x.size(), rng);
    v.normalize();
    const double fd = oracle::central_difference(h, x, v, eps);
    const double an = grad.dot(v);
    worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(fd), std::abs(an)));
  }
  return worst;
}

}  // namespace

TEST_CASE("gradient of h matches central differences at n = 32, 50 directions") {
  const oracle::Scene s = oracle::bump_scene(32, 3, 15.0, 17.0, 5.0, 0.3);
  for (const auto& [name, g] : all_inpainters(s.mask)) {
    if (name == "onion") continue;
    CAPTURE(name);
    const Vec grad = grad_h(*g, s.image, 1.0);
    REQUIRE(grad.norm() > 0.0);
    // h is quadratic for the harmonic fill, so a wide step only averages out the
    // Jacobi stopping noise. The network needs a short one to stay off its kinks.
    const double eps = name == "harmonic" ? 1e-2 : 1e-6;
    CHECK(worst_gradient_gap(*g, s.image, 1.0, 50, eps, 11) <= 1e-5);
    CHECK(worst_gradient_gap(*g, s.image, 2.5, 50, eps, 12) <= 1e-5);
  }
}

TEST_CASE("zero-weight network: grad h = zeta m x") {
  const oracle::Scene s = oracle::bump_scene(32, 3, 15.0, 17.0, 5.0, 0.3);
  const auto g = all_inpainters(s.mask)[2].g;
  const HEval e = eval_h(*g, s.image, 2.0);
  CHECK(e.grad == 2.0 * s.mask->embed(s.mask->restrict(s.image)));
  CHECK(e.value == doctest::Approx(s.mask->restrict(s.image).squaredNorm()).epsilon(1e-14));
}

TEST_CASE("fixed points: M^c G(x) = M^c x, h(G(x)) = 0, grad h(G(x)) = 0") {
  const oracle::Scene s = oracle::bump_scene(32, 4, 14.0, 15.0, 4.0, 0.4);
  std::mt19937_64 rng(8);
  for (const auto& [name, g] : all_inpainters(s.mask)) {
    CAPTURE(name);
    for (const Vec& x : {s.image, Vec(oracle::uniform(1024, rng))}) {
      const Vec gx = g->apply(x);
      CHECK(s.mask->restrict_complement(gx) == s.mask->restrict_complement(x));
      const HEval e = eval_h(*g, gx, 1.0);
      CHECK(e.value <= 1e-20);
      CHECK(e.grad.lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }
}

TEST_CASE("linear idempotent G on 6x6: dense gradient and Hessian oracles") {
  const auto m = std::make_shared<const StructureMask>(disk_mask(6, 2.5, 2.0, 1.6));
  REQUIRE(m->n_m() > 1);
  const OnionInpainter g(m);
  const oracle::Mat p = oracle::dense([&](const Vec& v) { return g.apply(v); }, 36, 36);
  CHECK((p * p - p).norm() <= 1e-12);
  const oracle::Mat q = oracle::Mat::Identity(36, 36) - p;
  const double zeta = 1.7;
  std::mt19937_64 rng(1);
  const Vec x = oracle::uniform(36, rng);
  CHECK((grad_h(g, x, zeta) - zeta * q.transpose() * (q * x)).norm() <= 1e-10);

  Eigen::SelfAdjointEigenSolver<oracle::Mat> eig(zeta * q.transpose() * q);
  const double lmax = eig.eigenvalues().maxCoeff();
  BetaOptions o;
  o.zeta = zeta;
  o.seed = 3;
  const BetaEstimate b = estimate_beta(g, x, o);
  CHECK(b.sample_norms.size() == 4);
  CHECK(std::abs(b.beta / 1.1 - lmax) <= 1e-3 * lmax);
}

TEST_CASE("beta for the identity inpainter is zero") {
  const auto empty = std::make_shared<const StructureMask>(8, std::vector<std::uint8_t>(64, 0));
  const OnionInpainter g(empty);
  CHECK(estimate_beta(g, Vec::Constant(64, 0.5), {}).beta == 0.0);
  BetaOptions bad;
  bad.count = 0;
  CHECK_THROWS_AS(estimate_beta(g, Vec::Zero(64), bad), ConfigError);
}

TEST_CASE("stepsizes") {
  const PnpParams p = make_pnp_params(2.0, 1.0, 8.0, 1.0);
  CHECK(p.sigma == doctest::Approx(0.99 / (1.0 + 0.1 * 8.0 + 1.0)));
  CHECK(p.admissible());
  PnpParams bad = p;
  bad.sigma *= 1.1;
  CHECK_FALSE(bad.admissible());
  CHECK_THROWS_AS(make_pnp_params(-1.0, 1.0, 8.0, 1.0), DomainError);
  CHECK_THROWS_AS(make_pnp_params(1.0, 0.0, 8.0, 1.0), DomainError);
}

TEST_CASE("rho_alpha") {
  const oracle::Scene s = oracle::bump_scene(32, 5, 16.0, 16.0, 4.0, 0.3);
  const HarmonicInpainter g(s.mask);
  CHECK(rho_alpha(s.image, s.image, g) == doctest::Approx(1.0));
  CHECK(rho_alpha(s.image, g.apply(s.image), g) == 0.0);
  CHECK_THROWS_AS(rho_alpha(g.apply(s.image), s.image, g), DegenerateStructure);
}

namespace {

struct Problem {
  oracle::Scene scene;
  std::shared_ptr<const FourierOperator> phi;
  std::shared_ptr<const GradientOperator> psi;
  SimulatedData data;
  Vec x_map;
};

Problem make_problem(int angles, double isnr, double amplitude) {
  Problem p;
  p.scene = oracle::bump_scene(32, 6, 15.0, 16.0, 3.0, amplitude);
  p.phi = make_radial_fourier(32, angles);
  p.psi = make_gradient_op(32);
  p.data = simulate_measurements(p.scene.image, *p.phi, isnr, 1);
  const double npsi = spectral_norm(*p.psi, {}), nphi = spectral_norm(*p.phi, {});
  p.x_map = solve_map(p.data.y, *p.phi, *p.psi, 100.0, p.data.epsilon, map_stepsizes(100.0, npsi * npsi, nphi * nphi))
                .x;
  return p;
}

}  // namespace

TEST_CASE("PnP solver: feasibility at termination, trace, determinism") {
  const Problem pr = make_problem(24, 30.0, 0.4);
  const HarmonicInpainter g(pr.scene.mask);
  const CredibleRegion region = make_credible_region(pr.x_map, *pr.psi, 100.0, pr.data.epsilon, 0.01);
  BetaOptions bo;
  const double beta = estimate_beta(g, pr.x_map, bo).beta;
  const PnpParams params = make_pnp_params(beta, 1.0, 8.0, 1.0);
  PnpOptions o;
  o.tol = 1e-5;
  o.max_iter = 50000;
  const PnpResult r = solve_pnp_buqo(pr.x_map, pr.data.y, *pr.phi, *pr.psi, region, g, params, o);
  CHECK(r.converged);
  CHECK(in_credible_region(r.x, region, *pr.phi, *pr.psi, pr.data.y, 1e-3).inside);
  CHECK(r.x.minCoeff() >= 0.0);
  CHECK(r.x.maxCoeff() <= 1.0);
  CHECK(r.h_value <= eval_h(g, pr.x_map, 1.0).value);
  CHECK(r.trace.size() == std::size_t(r.iterations));
  std::ostringstream csv;
  r.trace.write_csv(csv);
  CHECK(csv.str().rfind("iter,h_value,grad_norm,data_slack,l1_slack,rel_change\n", 0) == 0);
  const double rho = rho_alpha(pr.x_map, r.x, g);
  CHECK(rho >= 0.0);
  CHECK(rho <= 1.0 + 1e-9);

  const PnpResult again = solve_pnp_buqo(pr.x_map, pr.data.y, *pr.phi, *pr.psi, region, g, params, o);
  CHECK(again.x == r.x);
}

TEST_CASE("PnP solver: vacuous region and structure-free start") {
  const Problem pr = make_problem(24, 30.0, 0.4);
  const HarmonicInpainter g(pr.scene.mask);
  CredibleRegion vac = make_credible_region(pr.x_map, *pr.psi, 100.0, pr.data.epsilon, 0.01);
  vac.epsilon = 1e6;
  vac.l1_radius = 1e9;
  const PnpParams params = make_pnp_params(estimate_beta(g, pr.x_map, {}).beta, 1.0, 8.0, 1.0);
  const PnpResult r = solve_pnp_buqo(pr.x_map, pr.data.y, *pr.phi, *pr.psi, vac, g, params, {});
  CHECK(r.converged);
  CHECK(r.h_value <= eval_h(g, g.apply(pr.x_map), 1.0).value + 1e-20);
  CHECK(rho_alpha(pr.x_map, r.x, g) <= 1e-2);

  // A structure-free MAP is its own starting point and is feasible.
  const Vec free_map = g.apply(pr.x_map);
  const CredibleRegion region = make_credible_region(free_map, *pr.psi, 100.0, 1e6, 0.01);
  const PnpResult s = solve_pnp_buqo(free_map, pr.data.y, *pr.phi, *pr.psi, region, g, params, {});
  CHECK(s.converged);
  CHECK(s.iterations <= 2);
  CHECK(s.h_value <= 1e-20);
}

TEST_CASE("PnP solver: stepsize violation is a configuration error") {
  const Problem pr = make_problem(24, 30.0, 0.4);
  const HarmonicInpainter g(pr.scene.mask);
  const CredibleRegion region = make_credible_region(pr.x_map, *pr.psi, 100.0, pr.data.epsilon, 0.01);
  PnpParams p = make_pnp_params(1.0, 1.0, 8.0, 1.0);
  p.sigma = 10.0;
  CHECK_THROWS_AS(solve_pnp_buqo(pr.x_map, pr.data.y, *pr.phi, *pr.psi, region, g, p, {}), ConfigError);
}
