#include "buqo/bayes.hpp"
#include "buqo/map_solver.hpp"
#include "buqo/pipeline.hpp"
#include "buqo/sim.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace buqo;

TEST_CASE("zero data with a positive radius gives the zero image") {
  const auto phi = make_radial_fourier(32, 10);
  const auto psi = make_gradient_op(32);
  const CVec y = CVec::Zero(phi->measurements());
  const MapResult r = solve_map(y, *phi, *psi, 1.0, 0.1, make_pd_stepsizes(8.0, 1.0), {}, Vec::Zero(1024));
  CHECK(r.converged);
  CHECK(r.x.norm() == 0.0);
}

TEST_CASE("full noiseless sampling pins the phantom") {
  const Phantom p = generate_phantom(32, StructureSpec{0}, 5);
  const auto phi = make_full_fourier(32);
  const auto psi = make_gradient_op(32);
  const CVec y = phi->forward(p.image);
  const double eps = 1e-4 * y.norm();
  MapOptions o;
  o.max_iter = 20000;
  const MapResult r = solve_map(y, *phi, *psi, 1e-3, eps, map_stepsizes(1e-3, 8.0, 1.0), o);
  CHECK(r.converged);
  CHECK((r.x - p.image).norm() / p.image.norm() <= 1e-2);
}

TEST_CASE("stepsizes") {
  const PdStepsizes s = make_pd_stepsizes(8.0, 1.0, 2.0, 3.0);
  CHECK(s.sigma == doctest::Approx(0.99 / (2.0 * 8.0 + 3.0 * 1.0)));
  CHECK(s.admissible());
  const PdStepsizes m = map_stepsizes(100.0, 8.0, 1.0);
  CHECK(m.mu1 == 100.0);
  CHECK(m.mu2 == 10000.0);
  CHECK(m.admissible());
  CHECK_THROWS_AS(map_stepsizes(0.0, 8.0, 1.0), DomainError);
}

TEST_CASE("64x64 phantom at ratio 0.52, iSNR 30: feasible MAP inside its own credible region") {
  RunConfig cfg;
  const Scenario s = make_scenario(cfg, 40, 30.0, 1);
  const MapResult r = run_map(cfg, s.data.y, *s.phi, *s.psi, s.norm_psi_sq, s.norm_phi_sq, s.data.epsilon);
  CHECK(r.converged);
  CHECK(r.iterations <= 20000);
  CHECK(map_feasible(r.x, s.data.y, *s.phi, s.data.epsilon));
  CHECK((s.phi->forward(r.x) - s.data.y).norm() <= s.data.epsilon * (1 + 1e-3));
  CHECK(r.x.minCoeff() >= 0.0);
  CHECK(r.x.maxCoeff() <= 1.0);

  const CredibleRegion region = make_credible_region(r.x, *s.psi, cfg.lambda, s.data.epsilon, cfg.alpha);
  CHECK(in_credible_region(r.x, region, *s.phi, *s.psi, s.data.y, 1e-3).inside);

  // The trace ends inside the tolerated data ball and records every iteration.
  REQUIRE(r.trace.size() == std::size_t(r.iterations));
  CHECK(r.trace.data_residual.back() <= s.data.epsilon * (1 + 1e-3));
  std::ostringstream csv;
  r.trace.write_csv(csv);
  CHECK(csv.str().rfind("iter,", 0) == 0);

  // Determinism and lambda invariance of the default steps.
  const MapResult again = run_map(cfg, s.data.y, *s.phi, *s.psi, s.norm_psi_sq, s.norm_phi_sq, s.data.epsilon);
  CHECK(again.x == r.x);
  RunConfig unit = cfg;
  unit.lambda = 1.0;
  const MapResult r1 = run_map(unit, s.data.y, *s.phi, *s.psi, s.norm_psi_sq, s.norm_phi_sq, s.data.epsilon);
  CHECK((r1.x - r.x).norm() <= 1e-8 * r.x.norm());
}

TEST_CASE("shape and domain errors") {
  const auto phi = make_radial_fourier(32, 10);
  const auto psi = make_gradient_op(32);
  CHECK_THROWS_AS(solve_map(CVec::Zero(3), *phi, *psi, 1.0, 0.1, make_pd_stepsizes(8.0, 1.0)), ShapeError);
  const CVec y = CVec::Zero(phi->measurements());
  CHECK_THROWS_AS(solve_map(y, *phi, *psi, -1.0, 0.1, make_pd_stepsizes(8.0, 1.0)), DomainError);
}
