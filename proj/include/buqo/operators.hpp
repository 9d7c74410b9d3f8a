#pragma once

#include "buqo/common.hpp"

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

namespace buqo {

enum class OperatorKind { fourier_masked, gradient, haar, masking, linear_inpaint, composite };

std::string_view to_string(OperatorKind kind);

/// Real-linear map between real coordinate spaces.
///
/// Complex codomains are exposed through their real view: a vector of M complex
/// values is seen as 2M reals interleaved (re, im). The real inner product on that
/// view is Re<u, v>, which is the one the adjoint is taken against.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Index in_size() const = 0;
  virtual Index out_size() const = 0;
  virtual OperatorKind kind() const = 0;

  virtual Vec apply(const Vec& x) const = 0;
  virtual Vec adjoint(const Vec& v) const = 0;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

/// Binary frequency selection on an n x n grid, stored in FFT (unshifted) order.
struct SamplingPattern {
  int n = 0;
  int angles = 0;
  std::vector<std::uint8_t> mask;  // n*n, row-major, 1 = sampled
  Index m_count = 0;

  double ratio() const { return static_cast<double>(m_count) / (static_cast<double>(n) * n); }
  /// Mask with the DC bin moved to (n/2, n/2), for display.
  std::vector<std::uint8_t> centered() const;
};

/// Rasterize `angles` lines through the DC bin at angles k*pi/angles.
SamplingPattern make_radial_pattern(int n, int angles);

/// Smallest line count whose pattern covers at least `ratio` of the grid.
int lines_for_ratio(int n, double ratio);

/// Phi = S o F with F the unitary 2D DFT and S the selection of sampled bins.
class FourierOperator final : public LinearOperator {
 public:
  explicit FourierOperator(SamplingPattern pattern);
  ~FourierOperator() override;
  FourierOperator(const FourierOperator&) = delete;
  FourierOperator& operator=(const FourierOperator&) = delete;

  Index in_size() const override { return Index(n_) * n_; }
  Index out_size() const override { return 2 * measurements(); }
  OperatorKind kind() const override { return OperatorKind::fourier_masked; }

  Index measurements() const { return Index(selected_.size()); }
  const SamplingPattern& pattern() const { return pattern_; }

  CVec forward(const Vec& x) const;
  Vec adjoint_complex(const CVec& v) const;

  Vec apply(const Vec& x) const override;
  Vec adjoint(const Vec& v) const override;

 private:
  struct Plans;
  int n_;
  SamplingPattern pattern_;
  std::vector<Index> selected_;
  std::unique_ptr<Plans> plans_;
};

std::shared_ptr<const FourierOperator> make_radial_fourier(int n, int angles);

/// Fourier operator sampling every bin.
std::shared_ptr<const FourierOperator> make_full_fourier(int n);

/// Horizontal then vertical forward differences, replicate boundary. Output size 2n^2.
class GradientOperator final : public LinearOperator {
 public:
  explicit GradientOperator(int n);

  Index in_size() const override { return Index(n_) * n_; }
  Index out_size() const override { return 2 * Index(n_) * n_; }
  OperatorKind kind() const override { return OperatorKind::gradient; }

  Vec apply(const Vec& x) const override;
  Vec adjoint(const Vec& v) const override;

 private:
  int n_;
};

std::shared_ptr<const GradientOperator> make_gradient_op(int n);

/// Orthonormal 2D Haar transform (Mallat layout). Its adjoint is its inverse.
class HaarOperator final : public LinearOperator {
 public:
  HaarOperator(int n, int levels);

  Index in_size() const override { return Index(n_) * n_; }
  Index out_size() const override { return Index(n_) * n_; }
  OperatorKind kind() const override { return OperatorKind::haar; }

  Vec apply(const Vec& x) const override;
  Vec adjoint(const Vec& v) const override;

 private:
  int n_;
  int levels_;
};

/// Binary structure mask on an n x n image.
class StructureMask {
 public:
  StructureMask() = default;
  StructureMask(int n, std::vector<std::uint8_t> pixels);

  static StructureMask from_indices(int n, std::vector<Index> indices);

  int n() const { return n_; }
  Index n_pixels() const { return Index(n_) * n_; }
  Index n_m() const { return Index(index_set_.size()); }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  const std::vector<Index>& index_set() const { return index_set_; }
  const std::vector<Index>& complement_set() const { return complement_set_; }
  bool contains(Index flat) const { return pixels_[std::size_t(flat)] != 0; }

  /// M x
  Vec restrict(const Vec& x) const;
  /// M^T u
  Vec embed(const Vec& u) const;
  /// M^c x
  Vec restrict_complement(const Vec& x) const;
  /// (M^c)^T u
  Vec embed_complement(const Vec& u) const;

 private:
  int n_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::vector<Index> index_set_;
  std::vector<Index> complement_set_;
};

/// Restriction to the mask (or to its complement) as an operator.
class MaskingOperator final : public LinearOperator {
 public:
  MaskingOperator(std::shared_ptr<const StructureMask> mask, bool complement);

  Index in_size() const override { return mask_->n_pixels(); }
  Index out_size() const override {
    return complement_ ? mask_->n_pixels() - mask_->n_m() : mask_->n_m();
  }
  OperatorKind kind() const override { return OperatorKind::masking; }

  Vec apply(const Vec& x) const override;
  Vec adjoint(const Vec& v) const override;

 private:
  std::shared_ptr<const StructureMask> mask_;
  bool complement_;
};

/// A o B
class ComposedOperator final : public LinearOperator {
 public:
  ComposedOperator(OperatorPtr outer, OperatorPtr inner);

  Index in_size() const override { return inner_->in_size(); }
  Index out_size() const override { return outer_->out_size(); }
  OperatorKind kind() const override { return OperatorKind::composite; }

  Vec apply(const Vec& x) const override;
  Vec adjoint(const Vec& v) const override;

 private:
  OperatorPtr outer_;
  OperatorPtr inner_;
};

/// A - B
class DifferenceOperator final : public LinearOperator {
 public:
  DifferenceOperator(OperatorPtr lhs, OperatorPtr rhs);

  Index in_size() const override { return lhs_->in_size(); }
  Index out_size() const override { return lhs_->out_size(); }
  OperatorKind kind() const override { return OperatorKind::composite; }

  Vec apply(const Vec& x) const override;
  Vec adjoint(const Vec& v) const override;

 private:
  OperatorPtr lhs_;
  OperatorPtr rhs_;
};

struct PowerOptions {
  double tol = 1e-6;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

struct PowerResult {
  double norm = 0.0;
  int iterations = 0;
  std::vector<double> rayleigh;  // one entry per iteration
};

/// Power iteration on A^T A. Returns sqrt of the final Rayleigh quotient.
PowerResult power_iteration(const LinearOperator& op, const PowerOptions& opts);

inline double spectral_norm(const LinearOperator& op, const PowerOptions& opts) {
  return power_iteration(op, opts).norm;
}

}  // namespace buqo
