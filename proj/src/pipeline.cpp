#include "buqo/pipeline.hpp"

#include "buqo/buqo.hpp"
#include "buqo/io.hpp"
#include "buqo/pnp.hpp"

#include <fftw3.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>

namespace buqo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kMapMaxIter = 20000;
constexpr int kTestMaxIter = 50000;

int test_max_iter(const RunConfig& cfg) { return cfg.max_iter > 0 ? cfg.max_iter : kTestMaxIter; }

json parse_json(const std::string& text, const fs::path& path) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

template <class T>
T field(const json& j, const char* key, const fs::path& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(path.string() + ": missing or invalid field '" + key + "'", 0);
  }
}

json provenance(const RunConfig& cfg, std::uint64_t seed, const std::map<std::string, std::string>& files) {
  json p;
  p["tool"] = "buqo";
  p["version"] = kVersion;
  p["config_hash"] = cfg.hash();
  p["seed"] = seed;
  p["libraries"]["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION);
  p["libraries"]["fftw"] = std::string(fftw_version);
  json f = json::object();
  for (const auto& [name, bytes] : files) f[name] = io::crc32_hex(bytes);
  p["files"] = f;
  return p;
}

/// Writes each payload atomically, then a JSON record listing their CRCs.
void write_outputs(const fs::path& dir, const std::map<std::string, std::string>& files, const fs::path& record,
                   json body, const RunConfig& cfg, std::uint64_t seed) {
  for (const auto& [name, bytes] : files) io::atomic_write(dir / name, bytes);
  body["provenance"] = provenance(cfg, seed, files);
  io::atomic_write(dir / record, body.dump(2) + "\n");
}

std::string buqo_trace_csv(const BuqoTrace& t) {
  std::ostringstream os;
  os.precision(17);
  os << "iter,distance,data_slack,l1_slack,rel_change\n";
  for (std::size_t k = 0; k < t.iter.size(); ++k) {
    os << t.iter[k] << ',' << t.distance[k] << ',' << t.data_slack[k] << ',' << t.l1_slack[k] << ','
       << t.rel_change[k] << '\n';
  }
  return os.str();
}

struct SimulationRecord {
  int n = 0;
  int angles = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

SimulationRecord read_simulation(const fs::path& dir) {
  const fs::path path = dir / "simulate.json";
  const json j = parse_json(io::read_file(path), path);
  SimulationRecord r;
  r.n = field<int>(j, "n", path);
  r.angles = field<int>(j, "angles", path);
  r.epsilon = field<double>(j, "epsilon", path);
  r.seed = field<std::uint64_t>(j, "seed", path);
  return r;
}

CnnInit parse_cnn_init(std::string_view name) {
  if (name == "zero") return CnnInit::zero;
  if (name == "random") return CnnInit::random;
  if (name == "linear_gate") return CnnInit::linear_gate;
  throw ConfigError("unknown CNN init '" + std::string(name) + "' (expected zero, random or linear_gate)");
}

int worker_count(const RunConfig& cfg, std::size_t jobs) {
  long t = cfg.threads;
  if (t <= 0) {
    if (const char* env = std::getenv("BUQO_THREADS")) {
      char* end = nullptr;
      t = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || t < 1) throw ConfigError("BUQO_THREADS must be a positive integer");
    }
  }
  if (t <= 0) t = std::max(1u, std::thread::hardware_concurrency());
  return int(std::max<long>(1, std::min<long>(t, long(jobs))));
}

std::string cell_file_name(int angles, double isnr, std::uint64_t seed) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "cell_a%d_i%.17g_s%llu.json", angles, isnr, static_cast<unsigned long long>(seed));
  return buf;
}

json cell_to_json(const CellResult& c, const std::string& hash) {
  return json{{"config_hash", hash},
              {"angles", c.angles},
              {"isnr", c.isnr},
              {"seed", c.seed},
              {"rho_alpha", c.rho},
              {"decision", to_string(c.decision)},
              {"iterations", c.iterations},
              {"converged", c.converged},
              {"map_iterations", c.map_iterations},
              {"map_feasible", c.map_feasible}};
}

/// A finished cell from an earlier run, if it exists and matches this configuration.
std::optional<CellResult> load_cell(const fs::path& path, const std::string& hash, int angles, double isnr,
                                    std::uint64_t seed) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    const json j = json::parse(io::read_file(path));
    if (j.at("config_hash").get<std::string>() != hash) return std::nullopt;
    CellResult c;
    c.angles = j.at("angles").get<int>();
    c.isnr = j.at("isnr").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (c.angles != angles || c.isnr != isnr || c.seed != seed) return std::nullopt;
    c.rho = j.at("rho_alpha").get<double>();
    c.decision = j.at("decision").get<std::string>() == "reject_H0" ? Decision::reject_h0 : Decision::inconclusive;
    c.iterations = j.at("iterations").get<int>();
    c.converged = j.at("converged").get<bool>();
    c.map_iterations = j.at("map_iterations").get<int>();
    c.map_feasible = j.at("map_feasible").get<bool>();
    return c;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable leftovers are recomputed
  }
}

}  // namespace

std::string_view to_string(TestMode mode) { return mode == TestMode::buqo ? "buqo" : "pnp"; }

TestMode parse_test_mode(std::string_view name) {
  if (name == "buqo") return TestMode::buqo;
  if (name == "pnp") return TestMode::pnp;
  throw ConfigError("unknown test mode '" + std::string(name) + "' (expected buqo or pnp)");
}

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
  if (n < 32 || (n & (n - 1)) != 0) throw ConfigError("--n must be a power of two >= 32, got " + std::to_string(n));
  if (angles.empty()) throw ConfigError("--angles needs at least one value");
  for (int a : angles) {
    if (a < 1) throw ConfigError("--angles entries must be >= 1");
  }
  if (isnr.empty()) throw ConfigError("--isnr needs at least one value");
  for (double s : isnr) {
    if (!std::isfinite(s)) throw ConfigError("--isnr entries must be finite");
  }
  if (seeds.empty()) throw ConfigError("--seed needs at least one value");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("--lambda must be positive");
  const double lo = alpha_lower_bound(Index(n) * n);
  if (!(alpha > lo && alpha < 1.0)) throw ConfigError("--alpha must lie in (4 exp(-N/3), 1)");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("--tau must lie in (0, 1)");
  if (op == InpaintKind::cnn && weights.empty()) throw ConfigError("--op cnn requires --weights PATH");
  if (max_iter < 0) throw ConfigError("--max-iter must be >= 0");
  if (!(tol > 0.0) || !(map_tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (!(zeta > 0.0) || !(gamma > 0.0)) throw ConfigError("zeta and gamma must be positive");
  if (!(amplitude >= 0.0) || !(radius > 0.0)) throw ConfigError("structure amplitude must be >= 0 and radius > 0");
  if (!(artifact >= 0.0)) throw ConfigError("--artifact must be >= 0");
  if (threads < 0) throw ConfigError("--threads must be >= 0");
}

std::string RunConfig::canonical_json() const {
  json j;
  j["n"] = n;
  j["angles"] = angles;
  j["isnr"] = isnr;
  j["seeds"] = seeds;
  j["lambda"] = lambda;
  j["alpha"] = alpha;
  j["tau"] = tau;
  j["op"] = to_string(op);
  j["weights"] = weights.string();
  j["mask"] = mask.string();
  j["max_iter"] = max_iter;
  j["tol"] = tol;
  j["map_tol"] = map_tol;
  j["zeta"] = zeta;
  j["gamma"] = gamma;
  j["phantom_seed"] = phantom_seed;
  j["amplitude"] = amplitude;
  j["radius"] = radius;
  j["artifact"] = artifact;
  j["version"] = kVersion;
  return j.dump();
}

std::string RunConfig::hash() const { return io::crc32_hex(canonical_json()); }

// ---------------------------------------------------------------------------
// Building blocks

double estimate_norm_sq(const LinearOperator& op) {
  PowerOptions opts;
  const double s = spectral_norm(op, opts);
  return s * s;
}

Scenario make_scenario(const RunConfig& cfg, int angles, double isnr, std::uint64_t seed) {
  Scenario s;
  StructureSpec spec;
  spec.count = 1;
  spec.radius = cfg.radius;
  spec.amplitude = cfg.amplitude;
  s.phantom = generate_phantom(cfg.n, spec, cfg.phantom_seed);
  s.mask = std::make_shared<const StructureMask>(s.phantom.structures.at(0).mask);
  s.phi = make_radial_fourier(cfg.n, angles);
  s.psi = make_gradient_op(cfg.n);
  s.norm_psi_sq = estimate_norm_sq(*s.psi);
  s.norm_phi_sq = estimate_norm_sq(*s.phi);
  s.data = simulate_measurements(s.phantom.image, *s.phi, isnr, seed);
  return s;
}

MapResult run_map(const RunConfig& cfg, const CVec& y, const FourierOperator& phi, const LinearOperator& psi,
                  double norm_psi_sq, double norm_phi_sq, double epsilon) {
  MapOptions opts;
  opts.tol = cfg.map_tol;
  opts.max_iter = cfg.max_iter > 0 ? cfg.max_iter : kMapMaxIter;
  return solve_map(y, phi, psi, cfg.lambda, epsilon, map_stepsizes(cfg.lambda, norm_psi_sq, norm_phi_sq), opts);
}

bool map_feasible(const Vec& x, const CVec& y, const FourierOperator& phi, double epsilon) {
  if (x.minCoeff() < 0.0 || x.maxCoeff() > 1.0) return false;
  return (phi.forward(x) - y).norm() <= epsilon * (1.0 + 1e-3);
}

InpaintingPtr make_inpainter(const RunConfig& cfg, std::shared_ptr<const StructureMask> mask) {
  switch (cfg.op) {
    case InpaintKind::onion:
      return std::make_shared<OnionInpainter>(std::move(mask));
    case InpaintKind::harmonic:
      return std::make_shared<HarmonicInpainter>(std::move(mask));
    case InpaintKind::cnn: {
      auto w = std::make_shared<const CnnWeights>(cnn_load(cfg.weights));
      return std::make_shared<CnnInpainter>(std::move(w), std::move(mask));
    }
  }
  throw ConfigError("unknown inpainting operator");
}

TestOutcome run_test(const RunConfig& cfg, TestMode mode, const Vec& x_map, const Vec& x_test, const CVec& y,
                     const FourierOperator& phi, const LinearOperator& psi, double norm_psi_sq,
                     double norm_phi_sq, double epsilon, std::shared_ptr<const StructureMask> mask,
                     std::uint64_t seed) {
  if (!mask || mask->n_m() == 0) throw DegenerateStructure("the structure mask is empty");
  require_size(mask->n_pixels(), x_map.size(), "structure mask vs image");
  const CredibleRegion region = make_credible_region(x_map, psi, cfg.lambda, epsilon, cfg.alpha);

  TestOutcome out;
  out.mode = mode;
  out.x_test = x_test;
  if (mode == TestMode::pnp) {
    const InpaintingPtr g = make_inpainter(cfg, mask);
    out.inpainter = std::string(to_string(g->kind()));
    BetaOptions bo;
    bo.zeta = cfg.zeta;
    bo.seed = seed;
    out.beta = estimate_beta(*g, x_test, bo).beta;
    const PnpParams params = make_pnp_params(out.beta, cfg.zeta, norm_psi_sq, norm_phi_sq);
    PnpOptions opts;
    opts.tol = cfg.tol;
    opts.max_iter = test_max_iter(cfg);
    const PnpResult r = solve_pnp_buqo(x_test, y, phi, psi, region, *g, params, opts);
    out.rho = rho_alpha(x_test, r.x, *g);
    out.decision = decide(out.rho, cfg.tau, cfg.alpha);
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.membership = r.membership;
    out.h_value = r.h_value;
    out.grad_norm = r.grad_norm;
    out.g_test = g->apply(x_test);
    out.x_out = r.x;
    out.g_out = r.gx;
    std::ostringstream csv;
    r.trace.write_csv(csv);
    out.trace_csv = csv.str();
  } else {
    if (cfg.op != InpaintKind::onion) {
      throw ConfigError("buqo mode needs a linear inpainting operator: use --op onion");
    }
    const OnionInpainter onion(mask);
    out.inpainter = "onion";
    BuqoParams params = default_buqo_params(x_test, onion, norm_psi_sq, norm_phi_sq);
    params.gamma = cfg.gamma;
    params.refresh_sigma();
    BuqoOptions opts;
    opts.tol = cfg.tol;
    opts.max_iter = test_max_iter(cfg);
    opts.test_tau = cfg.tau;
    const BuqoResult r = solve_buqo(x_test, y, phi, psi, region, params, opts);
    out.rho = r.rho;
    out.decision = decide(r.rho, cfg.tau, cfg.alpha);
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.membership = r.membership;
    out.distance = r.distance;
    out.g_test = params.x_s0;
    out.x_out = r.x_c;
    out.g_out = r.x_s;
    out.trace_csv = buqo_trace_csv(r.trace);
  }
  return out;
}

CellResult run_cell(const RunConfig& cfg, int angles, double isnr, std::uint64_t seed) {
  const Scenario s = make_scenario(cfg, angles, isnr, seed);
  const MapResult m = run_map(cfg, s.data.y, *s.phi, *s.psi, s.norm_psi_sq, s.norm_phi_sq, s.data.epsilon);
  const Vec x_test = cfg.artifact > 0.0 ? inject_artifact(m.x, *s.mask, cfg.artifact) : m.x;
  const TestOutcome t = run_test(cfg, TestMode::pnp, m.x, x_test, s.data.y, *s.phi, *s.psi, s.norm_psi_sq,
                                 s.norm_phi_sq, s.data.epsilon, s.mask, seed);
  CellResult c;
  c.angles = angles;
  c.isnr = isnr;
  c.seed = seed;
  c.rho = t.rho;
  c.decision = t.decision;
  c.iterations = t.iterations;
  c.converged = t.converged;
  c.map_iterations = m.iterations;
  c.map_feasible = map_feasible(m.x, s.data.y, *s.phi, s.data.epsilon);
  return c;
}

std::string format_cell_row(const CellResult& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%llu,%.17g,%s,%d,%d\n", c.angles, c.isnr,
                static_cast<unsigned long long>(c.seed), c.rho, std::string(to_string(c.decision)).c_str(),
                c.iterations, c.converged ? 1 : 0);
  return buf;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_simulate(const RunConfig& cfg) {
  cfg.validate();
  const int angles = cfg.angles.front();
  const double isnr = cfg.isnr.front();
  const std::uint64_t seed = cfg.seeds.front();
  const Scenario s = make_scenario(cfg, angles, isnr, seed);

  std::map<std::string, std::string> files;
  files["truth.imgf"] = io::encode_imgf(s.phantom.image, cfg.n, cfg.n);
  files["structure.pgm"] = io::encode_pgm_mask(*s.mask);
  files["y.cplx"] = io::encode_cplx(s.data.y);

  const PhantomStructure& st = s.phantom.structures.front();
  json body;
  body["n"] = cfg.n;
  body["angles"] = angles;
  body["ratio"] = s.phi->pattern().ratio();
  body["m_count"] = s.phi->measurements();
  body["isnr"] = isnr;
  body["delta"] = s.data.delta;
  body["epsilon"] = s.data.epsilon;
  body["seed"] = seed;
  body["phantom"] = {{"seed", cfg.phantom_seed},
                     {"amplitude", st.amplitude},
                     {"radius", cfg.radius},
                     {"center", json::array({st.center_row, st.center_col})},
                     {"structure_pixels", s.mask->n_m()}};
  body["config"] = json::parse(cfg.canonical_json());
  write_outputs(cfg.out, files, "simulate.json", body, cfg, seed);
  std::cout << "simulate: M/N = " << s.phi->pattern().ratio() << ", epsilon = " << s.data.epsilon << "\n";
  return kExitOk;
}

int cmd_map(const RunConfig& cfg) {
  cfg.validate();
  const SimulationRecord sim = read_simulation(cfg.out);
  const CVec y = io::read_cplx(cfg.out / "y.cplx");
  const auto phi = make_radial_fourier(sim.n, sim.angles);
  require_size(y.size(), phi->measurements(), "y.cplx vs sampling pattern");
  const auto psi = make_gradient_op(sim.n);
  const MapResult m = run_map(cfg, y, *phi, *psi, estimate_norm_sq(*psi), estimate_norm_sq(*phi), sim.epsilon);
  const double residual = (phi->forward(m.x) - y).norm();
  const bool feasible = map_feasible(m.x, y, *phi, sim.epsilon);

  std::ostringstream trace;
  m.trace.write_csv(trace);
  std::map<std::string, std::string> files;
  files["map.imgf"] = io::encode_imgf(m.x, sim.n, sim.n);
  files["map_trace.csv"] = trace.str();
  json body;
  body["iterations"] = m.iterations;
  body["converged"] = m.converged;
  body["feasible"] = feasible;
  body["data_residual"] = residual;
  body["epsilon"] = sim.epsilon;
  body["lambda"] = cfg.lambda;
  body["reg_value"] = m.trace.reg_value.empty() ? 0.0 : m.trace.reg_value.back();
  body["config"] = json::parse(cfg.canonical_json());
  write_outputs(cfg.out, files, "map.json", body, cfg, sim.seed);
  std::cout << "map: " << m.iterations << " iterations, residual/epsilon = " << residual / sim.epsilon
            << (feasible ? "" : " (infeasible)") << "\n";
  return feasible ? kExitOk : kExitNotConverged;
}

int cmd_test(const RunConfig& cfg, TestMode mode) {
  cfg.validate();
  const SimulationRecord sim = read_simulation(cfg.out);
  const CVec y = io::read_cplx(cfg.out / "y.cplx");
  int n = 0;
  const Vec x_map = io::read_imgf(cfg.out / "map.imgf", &n);
  if (n != sim.n) throw ConfigError("map.imgf size does not match simulate.json");
  const fs::path mask_path = cfg.mask.empty() ? cfg.out / "structure.pgm" : cfg.mask;
  auto mask = std::make_shared<const StructureMask>(io::read_pgm_mask(mask_path));
  if (mask->n() != sim.n) throw ConfigError(mask_path.string() + ": mask size does not match the image");
  if (mask->n_m() == 0) throw DegenerateStructure(mask_path.string() + ": the structure mask is empty");

  const auto phi = make_radial_fourier(sim.n, sim.angles);
  require_size(y.size(), phi->measurements(), "y.cplx vs sampling pattern");
  const auto psi = make_gradient_op(sim.n);
  const Vec x_test = cfg.artifact > 0.0 ? inject_artifact(x_map, *mask, cfg.artifact) : x_map;
  const TestOutcome t = run_test(cfg, mode, x_map, x_test, y, *phi, *psi, estimate_norm_sq(*psi),
                                 estimate_norm_sq(*phi), sim.epsilon, mask, sim.seed);

  std::map<std::string, std::string> files;
  files["x_dd.imgf"] = io::encode_imgf(t.x_out, n, n);
  files["g_x_dd.imgf"] = io::encode_imgf(t.g_out, n, n);
  files["g_map.imgf"] = io::encode_imgf(t.g_test, n, n);
  files["diff_map.png"] = io::encode_png_gray(io::log_difference(t.x_test, t.g_test), n, n);
  files["diff_x_dd.png"] = io::encode_png_gray(io::log_difference(t.x_out, t.g_out), n, n);
  files["test_trace.csv"] = t.trace_csv;

  json body;
  body["mode"] = to_string(mode);
  body["inpainter"] = t.inpainter;
  body["alpha"] = cfg.alpha;
  body["tau"] = cfg.tau;
  body["rho_alpha"] = t.rho;
  body["decision"] = to_string(t.decision);
  body["iterations"] = t.iterations;
  body["converged"] = t.converged;
  body["slacks"] = {{"data", t.membership.data_slack},
                    {"l1", t.membership.l1_slack},
                    {"box", t.membership.box_violation}};
  body["inside_region"] = t.membership.inside;
  if (mode == TestMode::pnp) {
    body["h_value"] = t.h_value;
    body["grad_norm"] = t.grad_norm;
    body["beta"] = t.beta;
    body["zeta"] = cfg.zeta;
  } else {
    body["distance"] = t.distance;
    body["gamma"] = cfg.gamma;
  }
  body["artifact"] = cfg.artifact;
  body["seed"] = sim.seed;
  body["config"] = json::parse(cfg.canonical_json());
  write_outputs(cfg.out, files, "report.json", body, cfg, sim.seed);
  std::cout << to_string(mode) << ": rho_alpha = " << t.rho << ", decision = " << to_string(t.decision) << ", "
            << t.iterations << " iterations\n";
  return t.converged ? kExitOk : kExitNotConverged;
}

int cmd_sweep(const RunConfig& cfg) {
  cfg.validate();
  if (!fs::is_directory(cfg.out)) throw ConfigError("output directory does not exist: " + cfg.out.string());
  const fs::path cell_dir = cfg.out / "cells";
  fs::create_directories(cell_dir);
  const std::string hash = cfg.hash();

  struct Job {
    int angles;
    double isnr;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int a : cfg.angles) {
    for (double s : cfg.isnr) {
      for (std::uint64_t seed : cfg.seeds) jobs.push_back({a, s, seed});
    }
  }
  std::sort(jobs.begin(), jobs.end(), [](const Job& l, const Job& r) {
    return std::tie(l.angles, l.isnr, l.seed) < std::tie(r.angles, r.isnr, r.seed);
  });
  jobs.erase(std::unique(jobs.begin(), jobs.end(),
                         [](const Job& l, const Job& r) {
                           return l.angles == r.angles && l.isnr == r.isnr && l.seed == r.seed;
                         }),
             jobs.end());

  std::vector<std::optional<CellResult>> results(jobs.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    results[i] = load_cell(cell_dir / cell_file_name(jobs[i].angles, jobs[i].isnr, jobs[i].seed), hash,
                           jobs[i].angles, jobs[i].isnr, jobs[i].seed);
    if (!results[i]) pending.push_back(i);
  }
  std::cout << "sweep: " << jobs.size() << " cells, " << jobs.size() - pending.size() << " resumed\n";

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size() || failed.load()) return;
      const Job& job = jobs[pending[k]];
      try {
        CellResult c = run_cell(cfg, job.angles, job.isnr, job.seed);
        io::atomic_write(cell_dir / cell_file_name(job.angles, job.isnr, job.seed),
                         cell_to_json(c, hash).dump() + "\n");
        std::lock_guard<std::mutex> lock(mu);
        std::cout << "  angles=" << c.angles << " isnr=" << c.isnr << " seed=" << c.seed << " rho=" << c.rho
                  << " iterations=" << c.iterations << std::endl;
        results[pending[k]] = std::move(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  const int nthreads = pending.empty() ? 0 : worker_count(cfg, pending.size());
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  std::string csv(kSweepHeader);
  bool all_ok = true;
  for (const auto& r : results) {
    csv += format_cell_row(*r);
    all_ok = all_ok && r->converged && r->map_feasible;
  }
  std::map<std::string, std::string> files{{"sweep.csv", csv}};
  json body;
  body["cells"] = jobs.size();
  body["config"] = json::parse(cfg.canonical_json());
  write_outputs(cfg.out, files, "sweep.json", body, cfg, cfg.seeds.front());
  return all_ok ? kExitOk : kExitNotConverged;
}

int cmd_cnn_init(const fs::path& path, std::string_view init, std::uint32_t width, std::uint64_t seed) {
  const CnnWeights w = make_cnn_weights(width, parse_cnn_init(init), seed);
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (!fs::is_directory(dir)) throw ConfigError("output directory does not exist: " + dir.string());
  io::atomic_write(path, cnn_serialize(w));
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitConfig;
  }
  return 1;
}

}  // namespace buqo
