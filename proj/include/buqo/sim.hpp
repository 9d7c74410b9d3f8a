#pragma once

#include "buqo/common.hpp"
#include "buqo/operators.hpp"

#include <cstdint>
#include <vector>

namespace buqo {

struct StructureSpec {
  int count = 1;
  double radius = 4.0;     // pixels
  double amplitude = 0.3;  // peak of the bump added to the base image
};

struct PhantomStructure {
  StructureMask mask;
  double amplitude = 0.0;
  double center_row = 0.0;
  double center_col = 0.0;
};

/// Piecewise-linear synthetic image plus localized bumps, values in [0, 1].
struct Phantom {
  int n = 0;
  Vec image;
  Vec base;  // image without the injected structures
  std::vector<PhantomStructure> structures;
  std::uint64_t seed = 0;
};

/// Overlapping ellipses, each carrying a linear intensity ramp; the topmost
/// ellipse wins. Structures are placed strictly inside a single ellipse, at
/// least 2 pixels from the image border and from each other.
Phantom generate_phantom(int n, const StructureSpec& spec, std::uint64_t seed);

struct SimulatedData {
  CVec y;
  double delta = 0.0;
  double epsilon = 0.0;
  double isnr = 0.0;
  SamplingPattern pattern;
  std::uint64_t seed = 0;
};

/// y = Phi x + w with iid complex Gaussian w of per-entry standard deviation
///   delta = ||Phi x||_2 / M * 10^(-isnr/20)
/// (real and imaginary parts each delta/sqrt(2)), and data-ball radius
///   epsilon = delta * sqrt(M + 2 sqrt(M)).
/// An infinite isnr disables the noise (delta = epsilon = 0).
SimulatedData simulate_measurements(const Vec& truth, const FourierOperator& phi, double isnr,
                                    std::uint64_t seed);

double noise_delta(const Vec& truth, const FourierOperator& phi, double isnr);

/// Adds a checkerboard-modulated bump inside the mask and clamps to [0, 1].
Vec inject_artifact(const Vec& x, const StructureMask& mask, double amplitude);

/// Disk mask of the given radius around (row, col).
StructureMask disk_mask(int n, double row, double col, double radius);

}  // namespace buqo
