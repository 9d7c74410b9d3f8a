#pragma once

#include "buqo/bayes.hpp"
#include "buqo/inpaint.hpp"
#include "buqo/map_solver.hpp"
#include "buqo/operators.hpp"
#include "buqo/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace buqo {

inline constexpr std::string_view kVersion = "1.0.0";

/// Process exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNotConverged = 3, kExitNumerical = 4 };

enum class TestMode { buqo, pnp };
std::string_view to_string(TestMode mode);
TestMode parse_test_mode(std::string_view name);

struct RunConfig {
  int n = 64;
  std::vector<int> angles{40};  // radial lines; 40/67/93 give M/N 0.52/0.76/0.90 at n = 64
  std::vector<double> isnr{30.0};
  std::vector<std::uint64_t> seeds{1};
  double lambda = 100.0;
  double alpha = 0.01;
  double tau = 0.02;
  InpaintKind op = InpaintKind::harmonic;
  std::filesystem::path weights;  // GDNW file for op = cnn
  std::filesystem::path out = ".";
  std::filesystem::path mask;     // structure mask for `test`; empty: <out>/structure.pgm
  int max_iter = 0;               // 0 keeps each solver's own cap
  double tol = 1e-6;              // relative-change tolerance of the test solvers
  double map_tol = 1e-5;
  double zeta = 1.0;
  double gamma = 1.0;
  std::uint64_t phantom_seed = 7;
  double amplitude = 0.3;  // injected structure
  double radius = 4.0;
  double artifact = 0.0;   // `test`: checkerboard amplitude added to the MAP inside the mask
  int threads = 0;         // sweep workers; 0 reads BUQO_THREADS, then the hardware count

  /// Throws ConfigError on any invalid entry.
  void validate() const;
  /// Canonical JSON of every field that affects results (not `out`, `threads`).
  std::string canonical_json() const;
  /// CRC32 of canonical_json(), hex.
  std::string hash() const;
};

/// Everything one grid cell needs before the MAP.
struct Scenario {
  Phantom phantom;
  std::shared_ptr<const StructureMask> mask;
  std::shared_ptr<const FourierOperator> phi;
  OperatorPtr psi;
  double norm_psi_sq = 0.0;
  double norm_phi_sq = 0.0;
  SimulatedData data;
};

Scenario make_scenario(const RunConfig& cfg, int angles, double isnr, std::uint64_t seed);

/// Norm estimates shared by every stage (power iteration, seed 0).
double estimate_norm_sq(const LinearOperator& op);

MapResult run_map(const RunConfig& cfg, const CVec& y, const FourierOperator& phi, const LinearOperator& psi,
                  double norm_psi_sq, double norm_phi_sq, double epsilon);

/// True iff ||Phi x - y|| <= epsilon (1 + 1e-3) and x in [0, 1]^N.
bool map_feasible(const Vec& x, const CVec& y, const FourierOperator& phi, double epsilon);

InpaintingPtr make_inpainter(const RunConfig& cfg, std::shared_ptr<const StructureMask> mask);

struct TestOutcome {
  TestMode mode = TestMode::pnp;
  std::string inpainter;
  double rho = 0.0;
  Decision decision = Decision::inconclusive;
  int iterations = 0;
  bool converged = false;
  Membership membership;
  double h_value = 0.0;    // pnp
  double grad_norm = 0.0;  // pnp
  double beta = 0.0;       // pnp
  double distance = 0.0;   // buqo
  Vec x_test;              // the image under test (MAP, possibly with an injected artifact)
  Vec g_test;              // its structure-free version
  Vec x_out;               // pnp: x double-dagger; buqo: x_C
  Vec g_out;               // pnp: G(x double-dagger); buqo: x_S
  std::string trace_csv;
};

/// Runs the selected test of the structure in `mask` on `x_test`, with the
/// credible region built around `x_map`.
TestOutcome run_test(const RunConfig& cfg, TestMode mode, const Vec& x_map, const Vec& x_test, const CVec& y,
                     const FourierOperator& phi, const LinearOperator& psi, double norm_psi_sq,
                     double norm_phi_sq, double epsilon, std::shared_ptr<const StructureMask> mask,
                     std::uint64_t seed);

struct CellResult {
  int angles = 0;
  double isnr = 0.0;
  std::uint64_t seed = 0;
  double rho = 0.0;
  Decision decision = Decision::inconclusive;
  int iterations = 0;
  bool converged = false;
  int map_iterations = 0;
  bool map_feasible = false;
};

/// simulate -> MAP -> PnP test of the phantom structure, entirely in memory.
CellResult run_cell(const RunConfig& cfg, int angles, double isnr, std::uint64_t seed);

/// One CSV row with fixed formatting, newline-terminated.
std::string format_cell_row(const CellResult& c);
inline constexpr std::string_view kSweepHeader = "angles,isnr,seed,rho_alpha,decision,iterations,converged\n";

// Commands. Each returns a process exit code and throws ConfigError,
// FormatError or NumericalError for the caller to map.
int cmd_simulate(const RunConfig& cfg);
int cmd_map(const RunConfig& cfg);
int cmd_test(const RunConfig& cfg, TestMode mode);
int cmd_sweep(const RunConfig& cfg);
/// Writes a fixture network: init is "zero", "random" or "linear_gate".
int cmd_cnn_init(const std::filesystem::path& path, std::string_view init, std::uint32_t width,
                 std::uint64_t seed);

/// Maps an exception thrown by a command to its exit code.
int exit_code_for(const std::exception& e);

}  // namespace buqo
