// Regenerates tests/fixtures: bundled networks, sample inputs and masks, and
// the primary-side reference outputs used by the parity regression test.
//
//   make_fixtures <fixture-dir>

#include "buqo/inpaint.hpp"
#include "buqo/io.hpp"
#include "buqo/sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <fixture-dir>\n";
    return 2;
  }
  const fs::path root = argv[1];
  for (const char* sub : {"networks", "inputs", "masks", "expected"}) fs::create_directories(root / sub);

  struct Net {
    const char* name;
    buqo::CnnInit init;
    std::uint32_t width;
    std::uint64_t seed;
  };
  const Net nets[] = {{"zero", buqo::CnnInit::zero, 16, 0},
                      {"random", buqo::CnnInit::random, 16, 1},
                      {"linear_gate", buqo::CnnInit::linear_gate, 4, 2}};

  json manifest;
  manifest["n"] = 32;
  for (const Net& net : nets) {
    const auto w = buqo::make_cnn_weights(net.width, net.init, net.seed);
    const fs::path file = fs::path("networks") / (std::string(net.name) + ".gdnw");
    buqo::cnn_save(w, root / file);
    manifest["networks"][net.name] = {{"file", file.string()}, {"width", net.width}, {"seed", net.seed}};
  }

  const auto random = buqo::cnn_load(root / "networks" / "random.gdnw");
  for (int i = 1; i <= 5; ++i) {
    buqo::StructureSpec none;
    none.count = 0;
    const auto ph = buqo::generate_phantom(32, none, std::uint64_t(i));
    const auto mask = buqo::disk_mask(32, 12.0 + 2 * i, 18.0 - i, 3.0 + 0.5 * (i % 3));
    const std::string id = std::to_string(i);
    buqo::io::write_imgf(root / "inputs" / ("phantom_" + id + ".imgf"), ph.image, 32);
    buqo::io::write_pgm_mask(root / "masks" / ("mask_" + id + ".pgm"), mask);
    // Outputs are computed from the stored (f32) input, as a reader would see it.
    const buqo::Vec x = buqo::io::read_imgf(root / "inputs" / ("phantom_" + id + ".imgf"));
    const buqo::Vec g = buqo::cnn_apply(random, x, mask);
    buqo::io::write_imgf(root / "expected" / ("random_" + id + ".imgf"), g, 32);
    manifest["samples"].push_back({{"input", "inputs/phantom_" + id + ".imgf"},
                                   {"mask", "masks/mask_" + id + ".pgm"},
                                   {"expected", "expected/random_" + id + ".imgf"},
                                   {"network", "random"}});
  }
  manifest["tolerance_max_abs"] = 1e-4;
  buqo::io::atomic_write(root / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}
