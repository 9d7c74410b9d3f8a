// Command-line front end: simulate -> map -> test, plus grid sweeps.

#include "buqo/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Options {
  buqo::RunConfig cfg;
  std::string op;
  std::string weights;
  std::string out = ".";
  std::string mask;
  std::string mode = "pnp";
};

void add_common(CLI::App* app, Options& o) {
  auto& c = o.cfg;
  app->add_option("--n", c.n, "image side length (power of two >= 32)");
  app->add_option("--angles", c.angles, "radial line counts (comma separated)")->delimiter(',');
  app->add_option("--isnr", c.isnr, "input SNR values in dB (comma separated)")->delimiter(',');
  app->add_option("--seed", c.seeds, "noise seeds (comma separated)")->delimiter(',');
  app->add_option("--lambda", c.lambda, "regularization weight");
  app->add_option("--alpha", c.alpha, "credible-region confidence parameter");
  app->add_option("--tau", c.tau, "decision threshold on rho_alpha");
  app->add_option("--op", o.op, "inpainting operator: onion | harmonic | cnn");
  app->add_option("--weights", o.weights, "GDNW weight file for --op cnn");
  app->add_option("--out", o.out, "output directory (must exist)");
  app->add_option("--max-iter", c.max_iter, "iteration cap for every solver (0: defaults)");
  app->add_option("--tol", c.tol, "relative-change tolerance of the BUQO / PnP solvers");
  app->add_option("--map-tol", c.map_tol, "relative-change tolerance of the MAP solver");
  app->add_option("--zeta", c.zeta, "PnP objective weight");
  app->add_option("--gamma", c.gamma, "BUQO distance weight");
  app->add_option("--phantom-seed", c.phantom_seed, "phantom layout seed");
  app->add_option("--amplitude", c.amplitude, "amplitude of the injected structure");
  app->add_option("--radius", c.radius, "radius of the injected structure in pixels");
}

buqo::RunConfig finish(const Options& o, buqo::TestMode mode) {
  buqo::RunConfig c = o.cfg;
  c.out = o.out;
  c.weights = o.weights;
  c.mask = o.mask;
  if (!o.op.empty()) {
    c.op = buqo::parse_inpaint_kind(o.op);
  } else if (mode == buqo::TestMode::buqo) {
    c.op = buqo::InpaintKind::onion;
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian uncertainty quantification by optimization for Fourier imaging"};
  app.set_version_flag("--version", std::string(buqo::kVersion));
  app.require_subcommand(1);

  Options o;
  auto* sim = app.add_subcommand("simulate", "phantom, structure mask and noisy Fourier data");
  add_common(sim, o);
  auto* map = app.add_subcommand("map", "MAP estimate from simulated data");
  add_common(map, o);
  auto* test = app.add_subcommand("test", "hypothesis test of the structure in a mask");
  add_common(test, o);
  test->add_option("--mode", o.mode, "buqo | pnp")->check(CLI::IsMember({"buqo", "pnp"}));
  test->add_option("--mask", o.mask, "binary PGM mask, 255 = structure (default <out>/structure.pgm)");
  test->add_option("--artifact", o.cfg.artifact, "checkerboard amplitude injected into the MAP inside the mask");
  auto* sweep = app.add_subcommand("sweep", "grid over angles x isnr x seeds; writes sweep.csv");
  add_common(sweep, o);
  sweep->add_option("--threads", o.cfg.threads, "worker count (default BUQO_THREADS or hardware)");

  std::string cnn_path, cnn_init = "random";
  std::uint32_t cnn_width = 16;
  std::uint64_t cnn_seed = 0;
  auto* cnn = app.add_subcommand("cnn-init", "write a fixture GDNW network");
  cnn->add_option("path", cnn_path, "output file")->required();
  cnn->add_option("--init", cnn_init, "zero | random | linear_gate")
      ->check(CLI::IsMember({"zero", "random", "linear_gate"}));
  cnn->add_option("--width", cnn_width, "hidden channel count");
  cnn->add_option("--seed", cnn_seed, "weight seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : buqo::kExitConfig;
  }

  try {
    if (*sim) return buqo::cmd_simulate(finish(o, buqo::TestMode::pnp));
    if (*map) return buqo::cmd_map(finish(o, buqo::TestMode::pnp));
    if (*test) {
      const buqo::TestMode mode = buqo::parse_test_mode(o.mode);
      return buqo::cmd_test(finish(o, mode), mode);
    }
    if (*sweep) return buqo::cmd_sweep(finish(o, buqo::TestMode::pnp));
    if (*cnn) return buqo::cmd_cnn_init(cnn_path, cnn_init, cnn_width, cnn_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return buqo::exit_code_for(e);
  }
  return buqo::kExitConfig;
}
