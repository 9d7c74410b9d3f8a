#include "buqo/operators.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

namespace buqo {

std::string_view to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::fourier_masked: return "fourier_masked";
    case OperatorKind::gradient: return "gradient";
    case OperatorKind::haar: return "haar";
    case OperatorKind::masking: return "masking";
    case OperatorKind::linear_inpaint: return "linear_inpaint";
    case OperatorKind::composite: return "composite";
  }
  return "unknown";
}

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int wrap(int k, int n) { return ((k % n) + n) % n; }

}  // namespace

// ---------------------------------------------------------------------------
// Sampling pattern

std::vector<std::uint8_t> SamplingPattern::centered() const {
  std::vector<std::uint8_t> out(mask.size(), 0);
  const int h = n / 2;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      out[std::size_t(wrap(r + h, n) * n + wrap(c + h, n))] = mask[std::size_t(r * n + c)];
    }
  }
  return out;
}

SamplingPattern make_radial_pattern(int n, int angles) {
  if (n < 4 || !is_power_of_two(n)) {
    throw ConfigError("radial pattern: n must be a power of two >= 4, got " + std::to_string(n));
  }
  if (angles < 1) {
    throw ConfigError("radial pattern: angles must be >= 1, got " + std::to_string(angles));
  }
  SamplingPattern p;
  p.n = n;
  p.angles = angles;
  p.mask.assign(std::size_t(n) * n, 0);
  const int h = n / 2;
  auto mark = [&](int kx, int ky) {
    if (kx < -h || kx >= h || ky < -h || ky >= h) return;
    p.mask[std::size_t(wrap(ky, n) * n + wrap(kx, n))] = 1;
  };
  for (int k = 0; k < angles; ++k) {
    const double theta = k * std::numbers::pi / angles;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    // Step along the major axis; std::round is odd-symmetric so +f and -f agree.
    if (std::abs(c) >= std::abs(s)) {
      for (int kx = -h; kx < h; ++kx) mark(kx, int(std::round(kx * s / c)));
    } else {
      for (int ky = -h; ky < h; ++ky) mark(int(std::round(ky * c / s)), ky);
    }
  }
  // Point symmetry f -> -f. Only the Nyquist row/column can break it above.
  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < n; ++col) {
      if (p.mask[std::size_t(r * n + col)]) p.mask[std::size_t(wrap(-r, n) * n + wrap(-col, n))] = 1;
    }
  }
  p.m_count = Index(std::count(p.mask.begin(), p.mask.end(), std::uint8_t{1}));
  return p;
}

int lines_for_ratio(int n, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw DomainError("lines_for_ratio: ratio must be in (0, 1]");
  // Coverage is not monotone in the line count (line sets are not nested), so scan.
  for (int a = 1; a < 4 * n; ++a) {
    if (make_radial_pattern(n, a).ratio() >= ratio) return a;
  }
  return 4 * n;
}

// ---------------------------------------------------------------------------
// Fourier operator

struct FourierOperator::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

FourierOperator::FourierOperator(SamplingPattern pattern)
    : n_(pattern.n), pattern_(std::move(pattern)), plans_(std::make_unique<Plans>()) {
  if (n_ < 1 || pattern_.mask.size() != std::size_t(n_) * n_) {
    throw ShapeError("FourierOperator: mask size does not match n");
  }
  for (std::size_t i = 0; i < pattern_.mask.size(); ++i) {
    if (pattern_.mask[i]) selected_.push_back(Index(i));
  }
  pattern_.m_count = Index(selected_.size());

  std::vector<Complex> scratch(std::size_t(n_) * n_);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard lock(planner_mutex());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->forward = fftw_plan_dft_2d(n_, n_, buf, buf, FFTW_FORWARD, flags);
  plans_->backward = fftw_plan_dft_2d(n_, n_, buf, buf, FFTW_BACKWARD, flags);
}

FourierOperator::~FourierOperator() {
  std::lock_guard lock(planner_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

CVec FourierOperator::forward(const Vec& x) const {
  require_size(x.size(), in_size(), "FourierOperator::forward");
  std::vector<Complex> buf(x.data(), x.data() + x.size());
  auto* raw = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(plans_->forward, raw, raw);
  const double scale = 1.0 / n_;
  CVec y(measurements());
  for (Index k = 0; k < y.size(); ++k) y[k] = buf[std::size_t(selected_[std::size_t(k)])] * scale;
  return y;
}

Vec FourierOperator::adjoint_complex(const CVec& v) const {
  require_size(v.size(), measurements(), "FourierOperator::adjoint");
  std::vector<Complex> buf(std::size_t(n_) * n_, Complex{});
  for (Index k = 0; k < v.size(); ++k) buf[std::size_t(selected_[std::size_t(k)])] = v[k];
  auto* raw = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(plans_->backward, raw, raw);
  const double scale = 1.0 / n_;
  Vec x(in_size());
  for (Index i = 0; i < x.size(); ++i) x[i] = buf[std::size_t(i)].real() * scale;
  return x;
}

Vec FourierOperator::apply(const Vec& x) const {
  const CVec y = forward(x);
  return Eigen::Map<const Vec>(reinterpret_cast<const double*>(y.data()), 2 * y.size());
}

Vec FourierOperator::adjoint(const Vec& v) const {
  require_size(v.size(), out_size(), "FourierOperator::adjoint");
  const CVec c = Eigen::Map<const CVec>(reinterpret_cast<const Complex*>(v.data()), v.size() / 2);
  return adjoint_complex(c);
}

std::shared_ptr<const FourierOperator> make_radial_fourier(int n, int angles) {
  return std::make_shared<const FourierOperator>(make_radial_pattern(n, angles));
}

std::shared_ptr<const FourierOperator> make_full_fourier(int n) {
  if (n < 1) throw ConfigError("make_full_fourier: n must be positive");
  SamplingPattern p;
  p.n = n;
  p.angles = 0;
  p.mask.assign(std::size_t(n) * n, 1);
  p.m_count = Index(n) * n;
  return std::make_shared<const FourierOperator>(std::move(p));
}

// ---------------------------------------------------------------------------
// Gradient

GradientOperator::GradientOperator(int n) : n_(n) {
  if (n < 2) throw ConfigError("GradientOperator: n must be >= 2");
}

Vec GradientOperator::apply(const Vec& x) const {
  require_size(x.size(), in_size(), "GradientOperator::apply");
  const Index n = n_, N = n * n;
  Vec out = Vec::Zero(2 * N);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Index p = i * n + j;
      if (j + 1 < n) out[p] = x[p + 1] - x[p];
      if (i + 1 < n) out[N + p] = x[p + n] - x[p];
    }
  }
  return out;
}

Vec GradientOperator::adjoint(const Vec& v) const {
  require_size(v.size(), out_size(), "GradientOperator::adjoint");
  const Index n = n_, N = n * n;
  Vec out = Vec::Zero(N);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Index p = i * n + j;
      if (j + 1 < n) {
        out[p + 1] += v[p];
        out[p] -= v[p];
      }
      if (i + 1 < n) {
        out[p + n] += v[N + p];
        out[p] -= v[N + p];
      }
    }
  }
  return out;
}

std::shared_ptr<const GradientOperator> make_gradient_op(int n) {
  return std::make_shared<const GradientOperator>(n);
}

// ---------------------------------------------------------------------------
// Haar

HaarOperator::HaarOperator(int n, int levels) : n_(n), levels_(levels) {
  if (!is_power_of_two(n) || n < 2) throw ConfigError("HaarOperator: n must be a power of two >= 2");
  if (levels < 1 || (n >> levels) < 1) throw ConfigError("HaarOperator: too many levels for n");
}

namespace {

// One orthonormal Haar analysis step on a strided line of length len.
void haar_line_forward(double* base, Index stride, Index len, std::vector<double>& tmp) {
  const double r = std::numbers::sqrt2 / 2.0;
  const Index half = len / 2;
  for (Index k = 0; k < half; ++k) {
    const double a = base[(2 * k) * stride], b = base[(2 * k + 1) * stride];
    tmp[std::size_t(k)] = r * (a + b);
    tmp[std::size_t(half + k)] = r * (a - b);
  }
  for (Index k = 0; k < len; ++k) base[k * stride] = tmp[std::size_t(k)];
}

void haar_line_inverse(double* base, Index stride, Index len, std::vector<double>& tmp) {
  const double r = std::numbers::sqrt2 / 2.0;
  const Index half = len / 2;
  for (Index k = 0; k < half; ++k) {
    const double s = base[k * stride], d = base[(half + k) * stride];
    tmp[std::size_t(2 * k)] = r * (s + d);
    tmp[std::size_t(2 * k + 1)] = r * (s - d);
  }
  for (Index k = 0; k < len; ++k) base[k * stride] = tmp[std::size_t(k)];
}

}  // namespace

Vec HaarOperator::apply(const Vec& x) const {
  require_size(x.size(), in_size(), "HaarOperator::apply");
  Vec out = x;
  std::vector<double> tmp(static_cast<std::size_t>(n_));
  Index len = n_;
  for (int l = 0; l < levels_ && len >= 2; ++l, len /= 2) {
    for (Index r = 0; r < len; ++r) haar_line_forward(out.data() + r * n_, 1, len, tmp);
    for (Index c = 0; c < len; ++c) haar_line_forward(out.data() + c, n_, len, tmp);
  }
  return out;
}

Vec HaarOperator::adjoint(const Vec& v) const {
  require_size(v.size(), out_size(), "HaarOperator::adjoint");
  Vec out = v;
  std::vector<double> tmp(static_cast<std::size_t>(n_));
  int used = 0;
  for (Index len = n_; used < levels_ && len >= 2; len /= 2) ++used;
  for (int l = used - 1; l >= 0; --l) {
    const Index len = Index(n_) >> l;
    for (Index c = 0; c < len; ++c) haar_line_inverse(out.data() + c, n_, len, tmp);
    for (Index r = 0; r < len; ++r) haar_line_inverse(out.data() + r * n_, 1, len, tmp);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structure mask

StructureMask::StructureMask(int n, std::vector<std::uint8_t> pixels) : n_(n), pixels_(std::move(pixels)) {
  if (n < 1) throw ConfigError("StructureMask: n must be positive");
  if (pixels_.size() != std::size_t(n) * n) throw ShapeError("StructureMask: pixel grid is not n x n");
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    if (pixels_[i] > 1) throw ConfigError("StructureMask: entries must be 0 or 1");
    (pixels_[i] ? index_set_ : complement_set_).push_back(Index(i));
  }
}

StructureMask StructureMask::from_indices(int n, std::vector<Index> indices) {
  std::vector<std::uint8_t> px(std::size_t(n) * n, 0);
  for (Index i : indices) {
    if (i < 0 || i >= Index(n) * n) throw ShapeError("StructureMask: index out of range");
    px[std::size_t(i)] = 1;
  }
  return StructureMask(n, std::move(px));
}

Vec StructureMask::restrict(const Vec& x) const {
  require_size(x.size(), n_pixels(), "StructureMask::restrict");
  Vec u(n_m());
  for (std::size_t k = 0; k < index_set_.size(); ++k) u[Index(k)] = x[index_set_[k]];
  return u;
}

Vec StructureMask::embed(const Vec& u) const {
  require_size(u.size(), n_m(), "StructureMask::embed");
  Vec x = Vec::Zero(n_pixels());
  for (std::size_t k = 0; k < index_set_.size(); ++k) x[index_set_[k]] = u[Index(k)];
  return x;
}

Vec StructureMask::restrict_complement(const Vec& x) const {
  require_size(x.size(), n_pixels(), "StructureMask::restrict_complement");
  Vec u(Index(complement_set_.size()));
  for (std::size_t k = 0; k < complement_set_.size(); ++k) u[Index(k)] = x[complement_set_[k]];
  return u;
}

Vec StructureMask::embed_complement(const Vec& u) const {
  require_size(u.size(), Index(complement_set_.size()), "StructureMask::embed_complement");
  Vec x = Vec::Zero(n_pixels());
  for (std::size_t k = 0; k < complement_set_.size(); ++k) x[complement_set_[k]] = u[Index(k)];
  return x;
}

MaskingOperator::MaskingOperator(std::shared_ptr<const StructureMask> mask, bool complement)
    : mask_(std::move(mask)), complement_(complement) {
  if (!mask_) throw ConfigError("MaskingOperator: null mask");
}

Vec MaskingOperator::apply(const Vec& x) const {
  return complement_ ? mask_->restrict_complement(x) : mask_->restrict(x);
}

Vec MaskingOperator::adjoint(const Vec& v) const {
  return complement_ ? mask_->embed_complement(v) : mask_->embed(v);
}

// ---------------------------------------------------------------------------
// Composites

ComposedOperator::ComposedOperator(OperatorPtr outer, OperatorPtr inner)
    : outer_(std::move(outer)), inner_(std::move(inner)) {
  if (!outer_ || !inner_) throw ConfigError("ComposedOperator: null operand");
  require_size(outer_->in_size(), inner_->out_size(), "ComposedOperator");
}

Vec ComposedOperator::apply(const Vec& x) const { return outer_->apply(inner_->apply(x)); }
Vec ComposedOperator::adjoint(const Vec& v) const { return inner_->adjoint(outer_->adjoint(v)); }

DifferenceOperator::DifferenceOperator(OperatorPtr lhs, OperatorPtr rhs) : lhs_(std::move(lhs)), rhs_(std::move(rhs)) {
  if (!lhs_ || !rhs_) throw ConfigError("DifferenceOperator: null operand");
  require_size(rhs_->in_size(), lhs_->in_size(), "DifferenceOperator domain");
  require_size(rhs_->out_size(), lhs_->out_size(), "DifferenceOperator codomain");
}

Vec DifferenceOperator::apply(const Vec& x) const { return lhs_->apply(x) - rhs_->apply(x); }
Vec DifferenceOperator::adjoint(const Vec& v) const { return lhs_->adjoint(v) - rhs_->adjoint(v); }

// ---------------------------------------------------------------------------
// Power iteration

PowerResult power_iteration(const LinearOperator& op, const PowerOptions& opts) {
  PowerResult res;
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(op.in_size());
  for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  const double v_norm = v.norm();
  if (v_norm == 0.0) return res;
  v /= v_norm;

  double q_prev = 0.0;
  for (int k = 0; k < opts.max_iter; ++k) {
    const Vec w = op.adjoint(op.apply(v));
    const double q = v.dot(w);
    res.rayleigh.push_back(q);
    res.iterations = k + 1;
    const double w_norm = w.norm();
    if (!std::isfinite(w_norm)) throw NumericalError("power iteration: non-finite iterate");
    if (w_norm == 0.0) {
      res.norm = 0.0;
      return res;
    }
    res.norm = std::sqrt(std::max(q, 0.0));
    if (k > 0 && std::abs(q - q_prev) < opts.tol * q) break;
    q_prev = q;
    v = w / w_norm;
  }
  return res;
}

}  // namespace buqo
