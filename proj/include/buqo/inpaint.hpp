#pragma once

#include "buqo/common.hpp"
#include "buqo/operators.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace buqo {

enum class InpaintKind { onion, harmonic, cnn };

std::string_view to_string(InpaintKind kind);
InpaintKind parse_inpaint_kind(std::string_view name);

/// G(x) together with its pullback u -> J_G(x)^T u.
struct Linearization {
  Vec value;
  std::function<Vec(const Vec&)> pullback;
};

/// Inpainting operator for a mask: keeps the complement, synthesizes the mask.
/// Implementations are immutable and safe to share across threads.
class InpaintingOperator {
 public:
  virtual ~InpaintingOperator() = default;

  virtual InpaintKind kind() const = 0;
  virtual const StructureMask& mask() const = 0;

  virtual Vec apply(const Vec& x) const = 0;
  /// One forward pass whose intermediates are kept for the pullback.
  virtual Linearization linearize(const Vec& x) const = 0;

  Vec vjp(const Vec& x, const Vec& u) const { return linearize(x).pullback(u); }
};

using InpaintingPtr = std::shared_ptr<const InpaintingOperator>;

// ---------------------------------------------------------------------------
// Onion peel

struct PeelStep {
  Index target = 0;                 // flat pixel index
  std::vector<Index> contributors;  // complement pixels or earlier targets
  double weight = 0.0;              // 1 / contributors.size()
};

/// Greedy linear inpainter: mask pixels are visited by increasing Chebyshev
/// distance to the complement (ties by flat index); each takes the mean of its
/// already-resolved 8-neighbors.
class OnionInpainter final : public InpaintingOperator {
 public:
  explicit OnionInpainter(std::shared_ptr<const StructureMask> mask);

  InpaintKind kind() const override { return InpaintKind::onion; }
  const StructureMask& mask() const override { return *mask_; }
  const std::vector<PeelStep>& schedule() const { return schedule_; }

  Vec apply(const Vec& x) const override;
  Linearization linearize(const Vec& x) const override;

  /// L : complement values -> mask values.
  Vec fill(const Vec& complement_values) const;
  /// L^T : mask cotangent -> complement cotangent.
  Vec fill_adjoint(const Vec& mask_cotangent) const;

  /// L as a LinearOperator R^(N - N_M) -> R^(N_M).
  OperatorPtr as_operator() const;

 private:
  std::shared_ptr<const StructureMask> mask_;
  std::vector<PeelStep> schedule_;
};

// ---------------------------------------------------------------------------
// Harmonic

struct HarmonicOptions {
  double tol = 1e-10;  // stop when the largest Jacobi update falls below tol
  int max_iter = 1000000;
};

/// Discrete Laplace fill (4-neighbor stencil) with Dirichlet data from the
/// complement, solved by Jacobi sweeps.
class HarmonicInpainter final : public InpaintingOperator {
 public:
  HarmonicInpainter(std::shared_ptr<const StructureMask> mask, HarmonicOptions opts = {});

  InpaintKind kind() const override { return InpaintKind::harmonic; }
  const StructureMask& mask() const override { return *mask_; }
  const HarmonicOptions& options() const { return opts_; }

  Vec apply(const Vec& x) const override;
  Linearization linearize(const Vec& x) const override;

 private:
  Vec pullback(const Vec& u) const;

  std::shared_ptr<const StructureMask> mask_;
  HarmonicOptions opts_;
  // Per mask pixel (in index_set order): in-image degree, mask-neighbor slots,
  // complement-neighbor flat indices.
  std::vector<int> degree_;
  std::vector<std::vector<Index>> mask_nbrs_;
  std::vector<std::vector<Index>> comp_nbrs_;
};

Vec harmonic_inpaint(const Vec& x, const StructureMask& mask, double tol = 1e-10);

// ---------------------------------------------------------------------------
// Gated-convolution network

enum class LayerType : std::uint8_t { conv = 0, gated = 1 };

struct CnnLayer {
  LayerType type = LayerType::conv;
  std::uint32_t in_ch = 0;
  std::uint32_t out_ch = 0;
  std::uint32_t kernel = 5;
  std::vector<float> weight;  // [out][in][k][k]
  std::vector<float> bias;    // [out]
  std::vector<float> gate_weight;
  std::vector<float> gate_bias;
  std::vector<float> scale;  // folded normalization
  std::vector<float> shift;
};

struct CnnWeights {
  static constexpr std::uint32_t kVersion = 1;
  static constexpr int kLayers = 10;
  static constexpr int kConvLayers = 5;
  static constexpr std::uint32_t kKernel = 5;

  float slope = 0.2f;
  std::vector<CnnLayer> layers;

  std::uint32_t width() const { return layers.empty() ? 0 : layers.front().out_ch; }
};

/// Throws FormatError (offset 0) if the layer layout or values are invalid.
void validate(const CnnWeights& w);

/// Little-endian GDNW encoding, including the trailing CRC32.
std::string cnn_serialize(const CnnWeights& w);
CnnWeights cnn_parse(std::string_view bytes);

CnnWeights cnn_load(const std::filesystem::path& path);
void cnn_save(const CnnWeights& w, const std::filesystem::path& path);

enum class CnnInit {
  zero,       // all weights, biases and shifts zero, unit scales
  random,     // He-scaled Gaussian weights, small biases
  linear_gate // identity activation (slope 1), saturated gates: the network is affine
};

CnnWeights make_cnn_weights(std::uint32_t width, CnnInit init, std::uint64_t seed);

/// Activations from one forward pass; required by cnn_vjp.
struct CnnCache {
  bool valid = false;
  int n = 0;
  Vec output;                   // G(x)
  std::vector<double> network;  // F(z), n*n
  std::vector<std::vector<double>> pre;       // feature pre-activations per layer
  std::vector<std::vector<double>> pre_gate;  // gate pre-activations (gated layers)
  std::vector<std::uint8_t> mask;
};

CnnCache cnn_forward(const CnnWeights& w, const Vec& x, const StructureMask& mask);
Vec cnn_apply(const CnnWeights& w, const Vec& x, const StructureMask& mask);
/// J_G(x)^T u from a cache filled by cnn_forward. Throws StateError otherwise.
Vec cnn_vjp(const CnnWeights& w, const CnnCache& cache, const Vec& u);

class CnnInpainter final : public InpaintingOperator {
 public:
  CnnInpainter(std::shared_ptr<const CnnWeights> weights, std::shared_ptr<const StructureMask> mask);

  InpaintKind kind() const override { return InpaintKind::cnn; }
  const StructureMask& mask() const override { return *mask_; }
  const CnnWeights& weights() const { return *weights_; }

  Vec apply(const Vec& x) const override;
  Linearization linearize(const Vec& x) const override;

 private:
  std::shared_ptr<const CnnWeights> weights_;
  std::shared_ptr<const StructureMask> mask_;
};

}  // namespace buqo
