#include "buqo/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace buqo {

namespace {

struct Ellipse {
  double row, col;       // center
  double semi_a, semi_b;  // semi-axes along the rotated frame
  double angle;
  double level;           // intensity at the center
  double grad_row, grad_col;

  bool contains(double r, double c) const {
    const double dr = r - row, dc = c - col;
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double u = ca * dr + sa * dc, v = -sa * dr + ca * dc;
    return (u * u) / (semi_a * semi_a) + (v * v) / (semi_b * semi_b) <= 1.0;
  }
  double value(double r, double c) const { return level + grad_row * (r - row) + grad_col * (c - col); }
};

}  // namespace

StructureMask disk_mask(int n, double row, double col, double radius) {
  std::vector<std::uint8_t> px(std::size_t(n) * n, 0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (std::hypot(r - row, c - col) <= radius) px[std::size_t(r * n + c)] = 1;
    }
  }
  return StructureMask(n, std::move(px));
}

Phantom generate_phantom(int n, const StructureSpec& spec, std::uint64_t seed) {
  if (n < 32) throw ConfigError("generate_phantom: n must be >= 32, got " + std::to_string(n));
  if (spec.count < 0) throw ConfigError("generate_phantom: negative structure count");
  if (spec.count > 0 && !(spec.radius >= 1.0)) throw ConfigError("generate_phantom: structure radius must be >= 1");

  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double nd = n;
  std::vector<Ellipse> ellipses;
  // Outer "body" ellipse, then a few inner compartments drawn on top.
  {
    Ellipse e{};
    e.row = nd / 2 + uniform(-0.03, 0.03) * nd;
    e.col = nd / 2 + uniform(-0.03, 0.03) * nd;
    e.semi_a = uniform(0.40, 0.45) * nd;
    e.semi_b = uniform(0.34, 0.40) * nd;
    e.angle = uniform(-0.3, 0.3);
    e.level = uniform(0.30, 0.40);
    const double g = uniform(0.0, 0.12) / nd;
    const double phi = uniform(0.0, 2 * std::numbers::pi);
    e.grad_row = g * std::cos(phi);
    e.grad_col = g * std::sin(phi);
    ellipses.push_back(e);
  }
  for (int k = 0; k < 4; ++k) {
    Ellipse e{};
    const double rad = uniform(0.0, 0.22) * nd;
    const double phi = uniform(0.0, 2 * std::numbers::pi);
    e.row = nd / 2 + rad * std::cos(phi);
    e.col = nd / 2 + rad * std::sin(phi);
    e.semi_a = uniform(0.10, 0.20) * nd;
    e.semi_b = uniform(0.08, 0.16) * nd;
    e.angle = uniform(0.0, std::numbers::pi);
    e.level = uniform(0.45, 0.65);
    const double g = uniform(0.0, 0.25) / nd;
    const double psi = uniform(0.0, 2 * std::numbers::pi);
    e.grad_row = g * std::cos(psi);
    e.grad_col = g * std::sin(psi);
    ellipses.push_back(e);
  }

  Phantom ph;
  ph.n = n;
  ph.seed = seed;
  ph.base = Vec::Zero(Index(n) * n);
  std::vector<int> label(std::size_t(n) * n, -1);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      for (int k = int(ellipses.size()) - 1; k >= 0; --k) {
        if (ellipses[std::size_t(k)].contains(r, c)) {
          label[std::size_t(r * n + c)] = k;
          ph.base[r * n + c] = std::clamp(ellipses[std::size_t(k)].value(r, c), 0.0, 1.0);
          break;
        }
      }
    }
  }

  // Placement: a disk of radius R whose (R + 2)-neighbourhood lies in a single
  // ellipse, at least 2 pixels off the border, disjoint from earlier structures.
  std::vector<std::uint8_t> taken(std::size_t(n) * n, 0);
  const double R = spec.radius;
  const int reach = int(std::ceil(R + 2.0));
  ph.image = ph.base;
  for (int s = 0; s < spec.count; ++s) {
    bool placed = false;
    for (int attempt = 0; attempt < 4000 && !placed; ++attempt) {
      const int cr = int(uniform(reach + 2, n - reach - 2));
      const int cc = int(uniform(reach + 2, n - reach - 2));
      const int lab = label[std::size_t(cr * n + cc)];
      if (lab < 0) continue;
      bool ok = true;
      for (int r = cr - reach; r <= cr + reach && ok; ++r) {
        for (int c = cc - reach; c <= cc + reach && ok; ++c) {
          if (std::hypot(r - cr, c - cc) > R + 2.0) continue;
          if (r < 2 || c < 2 || r > n - 3 || c > n - 3) ok = false;
          else if (label[std::size_t(r * n + c)] != lab || taken[std::size_t(r * n + c)]) ok = false;
        }
      }
      if (!ok) continue;
      PhantomStructure st{disk_mask(n, cr, cc, R), spec.amplitude, double(cr), double(cc)};
      for (int r = cr - reach; r <= cr + reach; ++r) {
        for (int c = cc - reach; c <= cc + reach; ++c) {
          const double d = std::hypot(r - cr, c - cc);
          if (d <= R + 2.0) taken[std::size_t(r * n + c)] = 1;
          if (d < R) {
            const double w = std::cos(std::numbers::pi * d / (2.0 * R));
            ph.image[r * n + c] += spec.amplitude * w * w;
          }
        }
      }
      ph.structures.push_back(std::move(st));
      placed = true;
    }
    if (!placed) {
      throw ConfigError("generate_phantom: cannot place structure " + std::to_string(s) +
                        " disjointly (radius " + std::to_string(R) + ")");
    }
  }
  ph.image = ph.image.cwiseMax(0.0).cwiseMin(1.0);
  return ph;
}

double noise_delta(const Vec& truth, const FourierOperator& phi, double isnr) {
  if (std::isinf(isnr) && isnr > 0) return 0.0;
  if (!(isnr >= 0.0 && isnr <= 60.0)) throw DomainError("isnr must lie in [0, 60] dB");
  const double m = double(phi.measurements());
  return phi.forward(truth).norm() / m * std::pow(10.0, -isnr / 20.0);
}

SimulatedData simulate_measurements(const Vec& truth, const FourierOperator& phi, double isnr,
                                    std::uint64_t seed) {
  SimulatedData d;
  d.isnr = isnr;
  d.seed = seed;
  d.pattern = phi.pattern();
  d.delta = noise_delta(truth, phi, isnr);
  d.y = phi.forward(truth);
  const double m = double(phi.measurements());
  d.epsilon = d.delta * std::sqrt(m + 2.0 * std::sqrt(m));
  if (d.delta > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, d.delta / std::numbers::sqrt2);
    for (Index k = 0; k < d.y.size(); ++k) {
      const double re = normal(rng);
      const double im = normal(rng);
      d.y[k] += Complex(re, im);
    }
  }
  return d;
}

Vec inject_artifact(const Vec& x, const StructureMask& mask, double amplitude) {
  require_size(x.size(), mask.n_pixels(), "inject_artifact");
  Vec out = x;
  if (mask.n_m() == 0 || amplitude == 0.0) return out;
  const int n = mask.n();
  double cr = 0.0, cc = 0.0;
  for (Index p : mask.index_set()) {
    cr += double(p / n);
    cc += double(p % n);
  }
  cr /= double(mask.n_m());
  cc /= double(mask.n_m());
  double rmax = 0.0;
  for (Index p : mask.index_set()) rmax = std::max(rmax, std::hypot(double(p / n) - cr, double(p % n) - cc));
  const double width = rmax + 1.0;
  for (Index p : mask.index_set()) {
    const Index r = p / n, c = p % n;
    const double w = std::cos(std::numbers::pi * std::hypot(double(r) - cr, double(c) - cc) / (2.0 * width));
    const double sign = ((r + c) % 2 == 0) ? 1.0 : -1.0;
    out[p] = std::clamp(x[p] + amplitude * sign * w * w, 0.0, 1.0);
  }
  return out;
}

}  // namespace buqo
