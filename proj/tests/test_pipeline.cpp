#include "buqo/io.hpp"
#include "buqo/pipeline.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace buqo;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kCli = BUQO_CLI;
const fs::path kFixtures = BUQO_FIXTURES;

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("buqo_pipeline_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct Run {
  int code = -1;
  std::string err;
};

// Runs the CLI with stdout discarded and stderr captured.
Run cli(const std::string& args, const fs::path& err_file) {
  const std::string cmd = "\"" + kCli.string() + "\" " + args + " > /dev/null 2> \"" + err_file.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = fs::exists(err_file) ? io::read_file(err_file) : "";
  return r;
}

std::string out_arg(const fs::path& d) { return " --out \"" + d.string() + "\""; }

json read_json(const fs::path& p) { return json::parse(io::read_file(p)); }

}  // namespace

TEST_CASE("simulate, map and test run end to end") {
  const fs::path d = scratch("e2e");
  const fs::path err = d.parent_path() / "buqo_pipeline_e2e.err";
  REQUIRE(cli("simulate" + out_arg(d), err).code == kExitOk);
  for (const char* f : {"truth.imgf", "structure.pgm", "y.cplx", "simulate.json"}) CHECK(fs::exists(d / f));
  REQUIRE(cli("map" + out_arg(d), err).code == kExitOk);
  const json map = read_json(d / "map.json");
  CHECK(map.at("feasible").get<bool>());
  CHECK(map.at("data_residual").get<double>() <= map.at("epsilon").get<double>() * (1 + 1e-3));

  // Default scene: a 0.3-amplitude structure under 40 lines at 30 dB is detected.
  REQUIRE(cli("test --mode pnp" + out_arg(d), err).code == kExitOk);
  const json rep = read_json(d / "report.json");
  CHECK(rep.at("decision") == "reject_H0");
  CHECK(rep.at("rho_alpha").get<double>() > 0.02);
  CHECK(rep.at("inside_region").get<bool>());
  CHECK(rep.at("provenance").at("files").contains("x_dd.imgf"));
  for (const char* f : {"x_dd.imgf", "g_x_dd.imgf", "g_map.imgf", "diff_map.png", "diff_x_dd.png", "test_trace.csv"}) {
    CHECK(fs::exists(d / f));
  }

  REQUIRE(cli("test --mode buqo" + out_arg(d), err).code == kExitOk);
  const json bq = read_json(d / "report.json");
  CHECK(bq.at("mode") == "buqo");
  CHECK(bq.at("inpainter") == "onion");
  CHECK(bq.at("decision") == "reject_H0");

  REQUIRE(cli("test --mode pnp --artifact 0.2" + out_arg(d), err).code == kExitOk);
  CHECK(read_json(d / "report.json").at("artifact").get<double>() == 0.2);

  const std::string net = (kFixtures / "networks" / "zero.gdnw").string();
  REQUIRE(cli("test --mode pnp --op cnn --weights \"" + net + "\"" + out_arg(d), err).code == kExitOk);
  CHECK(read_json(d / "report.json").at("inpainter") == "cnn");
}

TEST_CASE("simulate is byte-identical across runs") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  const fs::path err = a.parent_path() / "buqo_pipeline_det.err";
  REQUIRE(cli("simulate --seed 5 --isnr 25" + out_arg(a), err).code == kExitOk);
  REQUIRE(cli("simulate --seed 5 --isnr 25" + out_arg(b), err).code == kExitOk);
  for (const char* f : {"truth.imgf", "structure.pgm", "y.cplx", "simulate.json"}) {
    CAPTURE(f);
    CHECK(io::read_file(a / f) == io::read_file(b / f));
  }
  const fs::path c = scratch("det_c");
  REQUIRE(cli("simulate --seed 6 --isnr 25" + out_arg(c), err).code == kExitOk);
  CHECK(io::read_file(a / "y.cplx") != io::read_file(c / "y.cplx"));
}

TEST_CASE("exit codes and error messages") {
  const fs::path d = scratch("errors");
  const fs::path err = d.parent_path() / "buqo_pipeline_errors.err";

  const fs::path missing = d / "no_such_dir";
  const Run r = cli("simulate" + out_arg(missing), err);
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find(missing.string()) != std::string::npos);

  CHECK(cli("simulate --n 48" + out_arg(d), err).code == kExitConfig);
  CHECK(cli("simulate --alpha 1.5" + out_arg(d), err).code == kExitConfig);
  CHECK(cli("simulate --bogus" + out_arg(d), err).code == kExitConfig);
  CHECK(cli("test --mode pnp --op cnn" + out_arg(d), err).code == kExitConfig);
  CHECK(cli("map" + out_arg(d), err).code == kExitConfig);  // nothing simulated yet

  REQUIRE(cli("simulate" + out_arg(d), err).code == kExitOk);
  REQUIRE(cli("map" + out_arg(d), err).code == kExitOk);

  SUBCASE("corrupt measurements") {
    const std::string y = io::read_file(d / "y.cplx");
    io::atomic_write(d / "y.cplx", y.substr(0, y.size() / 2));
    CHECK(cli("map" + out_arg(d), err).code == kExitConfig);
    io::atomic_write(d / "y.cplx", y);
  }
  SUBCASE("empty mask") {
    const StructureMask empty(64, std::vector<std::uint8_t>(64 * 64, 0));
    io::atomic_write(d / "empty.pgm", io::encode_pgm_mask(empty));
    const Run e = cli("test --mode pnp --mask \"" + (d / "empty.pgm").string() + "\"" + out_arg(d), err);
    CHECK(e.code == kExitConfig);
    CHECK(e.err.find("empty") != std::string::npos);
  }
  SUBCASE("buqo mode needs a linear inpainter") {
    CHECK(cli("test --mode buqo --op harmonic" + out_arg(d), err).code == kExitConfig);
  }
  SUBCASE("iteration cap") {
    CHECK(cli("test --mode pnp --max-iter 3" + out_arg(d), err).code == kExitNotConverged);
    CHECK_FALSE(read_json(d / "report.json").at("converged").get<bool>());
  }
}

TEST_CASE("sweep: one row per cell, resumable, deterministic") {
  const fs::path d = scratch("sweep");
  const fs::path err = d.parent_path() / "buqo_pipeline_sweep.err";
  const std::string grid = "sweep --angles 40,67,93 --isnr 20,35 --seed 1,2,3 --amplitude 0.05 --threads 1";
  REQUIRE(cli(grid + out_arg(d), err).code == kExitOk);
  const std::string csv = io::read_file(d / "sweep.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line + "\n" == kSweepHeader);
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 18);
  CHECK(read_json(d / "sweep.json").at("cells") == 18);

  int cells = 0;
  for (const auto& e : fs::directory_iterator(d / "cells")) cells += e.path().extension() == ".json";
  CHECK(cells == 18);

  // Drop one cell; the rerun recomputes it and reproduces the table.
  const fs::path victim = d / "cells" / "cell_a67_i20_s2.json";
  REQUIRE(fs::exists(victim));
  const auto stamp = fs::last_write_time(d / "cells" / "cell_a40_i20_s1.json");
  fs::remove(victim);
  REQUIRE(cli(grid + out_arg(d), err).code == kExitOk);
  CHECK(fs::exists(victim));
  CHECK(fs::last_write_time(d / "cells" / "cell_a40_i20_s1.json") == stamp);
  CHECK(io::read_file(d / "sweep.csv") == csv);

  // A one-cell sweep reproduces the matching row.
  const fs::path e = scratch("sweep_b");
  REQUIRE(cli("sweep --angles 40 --isnr 20 --seed 1 --amplitude 0.05 --threads 1" + out_arg(e), err).code == kExitOk);
  const std::string single = io::read_file(e / "sweep.csv");
  CHECK(csv.find(single.substr(kSweepHeader.size())) != std::string::npos);
}

TEST_CASE("run configuration hash") {
  RunConfig a;
  RunConfig b = a;
  CHECK(a.hash() == b.hash());
  b.out = "/elsewhere";
  b.threads = 3;
  CHECK(a.hash() == b.hash());
  b.lambda = 50.0;
  CHECK(a.hash() != b.hash());
  RunConfig bad;
  bad.angles.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.op = InpaintKind::cnn;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
