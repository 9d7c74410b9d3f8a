#include "buqo/inpaint.hpp"
#include "buqo/io.hpp"
#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>

using namespace buqo;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = BUQO_FIXTURES;

std::shared_ptr<const StructureMask> centre_disk(int n, double radius) {
  return std::make_shared<const StructureMask>(disk_mask(n, n / 2.0 - 0.5, n / 2.0 - 1.0, radius));
}

}  // namespace

TEST_CASE("zero weights: G(x) = (1 - m) x") {
  const auto w = cnn_load(kFixtures / "networks" / "zero.gdnw");
  const auto m = centre_disk(32, 5.0);
  std::mt19937_64 rng(1);
  const Vec x = oracle::uniform(1024, rng);
  Vec expect = x;
  for (Index p : m->index_set()) expect[p] = 0.0;
  CHECK(cnn_apply(w, x, *m) == expect);
}

TEST_CASE("complement preservation and idempotence are exact") {
  const auto w = cnn_load(kFixtures / "networks" / "random.gdnw");
  const auto m = centre_disk(32, 6.0);
  std::mt19937_64 rng(2);
  const Vec x = oracle::uniform(1024, rng);
  const Vec g = cnn_apply(w, x, *m);
  CHECK(m->restrict_complement(g) == m->restrict_complement(x));
  CHECK(cnn_apply(w, g, *m) == g);
  CHECK(m->restrict(g) != m->restrict(x));
}

TEST_CASE("affine network: pullback equals the dense Jacobian transpose on 8x8") {
  const auto w = cnn_load(kFixtures / "networks" / "linear_gate.gdnw");
  CHECK(w.slope == 1.0f);
  const auto m = std::make_shared<const StructureMask>(disk_mask(8, 3.5, 4.0, 2.0));
  std::mt19937_64 rng(3);
  const Vec x = oracle::uniform(64, rng);
  const Vec g0 = cnn_apply(w, Vec::Zero(64), *m);
  const oracle::Mat j = oracle::dense([&](const Vec& v) { return Vec(cnn_apply(w, v, *m) - g0); }, 64, 64);
  const CnnCache cache = cnn_forward(w, x, *m);
  const oracle::Mat jt = oracle::dense([&](const Vec& u) { return cnn_vjp(w, cache, u); }, 64, 64);
  CHECK((j.transpose() - jt).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("random network: directional derivatives match central differences") {
  const auto w = cnn_load(kFixtures / "networks" / "random.gdnw");
  const auto m = centre_disk(32, 5.0);
  std::mt19937_64 rng(4);
  const Vec x = oracle::uniform(1024, rng);
  const CnnCache cache = cnn_forward(w, x, *m);
  for (int t = 0; t < 10; ++t) {
    const Vec u = oracle::randn(1024, rng);
    const Vec v = oracle::randn(1024, rng).normalized();
    const double eps = 1e-5;
    const double fd = u.dot(cnn_apply(w, x + eps * v, *m) - cnn_apply(w, x - eps * v, *m)) / (2 * eps);
    CHECK(std::abs(cnn_vjp(w, cache, u).dot(v) - fd) <= 1e-5 * std::abs(fd));
  }
}

TEST_CASE("cotangent on the complement passes straight through") {
  const auto w = cnn_load(kFixtures / "networks" / "random.gdnw");
  const auto m = centre_disk(32, 4.0);
  std::mt19937_64 rng(5);
  const Vec x = oracle::uniform(1024, rng);
  Vec u = oracle::randn(1024, rng);
  for (Index p : m->index_set()) u[p] = 0.0;
  CHECK(cnn_vjp(w, cnn_forward(w, x, *m), u) == u);
}

TEST_CASE("state and shape errors") {
  const auto w = cnn_load(kFixtures / "networks" / "zero.gdnw");
  const auto m = centre_disk(32, 4.0);
  CHECK_THROWS_AS(cnn_vjp(w, CnnCache{}, Vec::Zero(1024)), StateError);
  CHECK_THROWS_AS(cnn_apply(w, Vec::Zero(100), *m), ShapeError);
  CHECK_THROWS_AS(cnn_apply(CnnWeights{}, Vec::Zero(1024), *m), ShapeError);
}

TEST_CASE("GDNW round trip is byte-identical") {
  for (const char* name : {"zero", "random", "linear_gate"}) {
    const fs::path f = kFixtures / "networks" / (std::string(name) + ".gdnw");
    const std::string bytes = io::read_file(f);
    CHECK(cnn_serialize(cnn_parse(bytes)) == bytes);
    CHECK(cnn_serialize(cnn_load(f)) == bytes);
  }
  const CnnWeights w = make_cnn_weights(3, CnnInit::random, 77);
  CHECK(cnn_serialize(cnn_parse(cnn_serialize(w))) == cnn_serialize(w));
  CHECK(cnn_parse(cnn_serialize(w)).width() == 3);
}

TEST_CASE("GDNW corruption") {
  const std::string bytes = cnn_serialize(make_cnn_weights(2, CnnInit::random, 5));

  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    CHECK_THROWS_WITH_AS(cnn_parse(b), doctest::Contains("magic"), FormatError);
  }
  SUBCASE("truncation names the missing layer") {
    for (std::size_t cut : {bytes.size() / 3, bytes.size() / 2, bytes.size() - 10}) {
      try {
        cnn_parse(std::string_view(bytes).substr(0, cut));
        FAIL("truncated file parsed");
      } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
        CHECK(std::string(e.what()).find("layer") != std::string::npos);
      }
    }
  }
  SUBCASE("every single-byte flip is detected") {
    int detected = 0;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      std::string b = bytes;
      b[i] = char(b[i] ^ 0x5a);
      try {
        cnn_parse(b);
      } catch (const FormatError&) {
        ++detected;
      }
    }
    CHECK(detected == int(bytes.size()));
  }
  SUBCASE("trailing bytes") { CHECK_THROWS_AS(cnn_parse(bytes + "x"), FormatError); }
}

TEST_CASE("bundled reference outputs") {
  const nlohmann::json manifest = nlohmann::json::parse(io::read_file(kFixtures / "manifest.json"));
  const double tol = manifest.at("tolerance_max_abs").get<double>();
  CHECK(tol == 1e-4);
  for (const auto& s : manifest.at("samples")) {
    const std::string net = s.at("network").get<std::string>();
    const auto w = cnn_load(kFixtures / manifest.at("networks").at(net).at("file").get<std::string>());
    int n = 0;
    const Vec x = io::read_imgf(kFixtures / s.at("input").get<std::string>(), &n);
    const StructureMask m = io::read_pgm_mask(kFixtures / s.at("mask").get<std::string>());
    const Vec expect = io::read_imgf(kFixtures / s.at("expected").get<std::string>());
    CHECK(n == manifest.at("n").get<int>());
    CHECK((cnn_apply(w, x, m) - expect).lpNorm<Eigen::Infinity>() <= tol);
  }
}
