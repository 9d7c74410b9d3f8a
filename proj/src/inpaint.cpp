#include "buqo/inpaint.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace buqo {

std::string_view to_string(InpaintKind kind) {
  switch (kind) {
    case InpaintKind::onion: return "onion";
    case InpaintKind::harmonic: return "harmonic";
    case InpaintKind::cnn: return "cnn";
  }
  return "unknown";
}

InpaintKind parse_inpaint_kind(std::string_view name) {
  if (name == "onion") return InpaintKind::onion;
  if (name == "harmonic") return InpaintKind::harmonic;
  if (name == "cnn") return InpaintKind::cnn;
  throw ConfigError("unknown inpainting operator '" + std::string(name) + "' (expected onion|harmonic|cnn)");
}

namespace {

std::shared_ptr<const StructureMask> require_mask(std::shared_ptr<const StructureMask> mask, const char* who) {
  if (!mask) throw ConfigError(std::string(who) + ": null mask");
  return mask;
}

class OnionFillOperator final : public LinearOperator {
 public:
  explicit OnionFillOperator(OnionInpainter g) : g_(std::move(g)) {}

  Index in_size() const override { return g_.mask().n_pixels() - g_.mask().n_m(); }
  Index out_size() const override { return g_.mask().n_m(); }
  OperatorKind kind() const override { return OperatorKind::linear_inpaint; }

  Vec apply(const Vec& x) const override { return g_.fill(x); }
  Vec adjoint(const Vec& v) const override { return g_.fill_adjoint(v); }

 private:
  OnionInpainter g_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Onion peel

OnionInpainter::OnionInpainter(std::shared_ptr<const StructureMask> mask)
    : mask_(require_mask(std::move(mask), "OnionInpainter")) {
  const int n = mask_->n();
  const Index npix = mask_->n_pixels();
  if (mask_->n_m() == 0) return;
  if (mask_->n_m() == npix) throw ConfigError("OnionInpainter: mask covers the whole image");

  // Multi-source BFS from the complement, 8-neighborhood (Chebyshev distance).
  std::vector<int> dist(std::size_t(npix), -1);
  std::deque<Index> queue;
  for (Index p : mask_->complement_set()) {
    dist[std::size_t(p)] = 0;
    queue.push_back(p);
  }
  while (!queue.empty()) {
    const Index p = queue.front();
    queue.pop_front();
    const int r = int(p / n), c = int(p % n);
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= n || cc >= n) continue;
        const Index q = Index(rr) * n + cc;
        if (dist[std::size_t(q)] < 0) {
          dist[std::size_t(q)] = dist[std::size_t(p)] + 1;
          queue.push_back(q);
        }
      }
    }
  }

  std::vector<Index> order = mask_->index_set();
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return dist[std::size_t(a)] < dist[std::size_t(b)]; });
  std::vector<std::uint8_t> resolved(std::size_t(npix), 0);
  for (Index p : mask_->complement_set()) resolved[std::size_t(p)] = 1;

  schedule_.reserve(order.size());
  for (Index t : order) {
    PeelStep step;
    step.target = t;
    const int r = int(t / n), c = int(t % n);
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= n || cc >= n) continue;
        const Index q = Index(rr) * n + cc;
        if (resolved[std::size_t(q)]) step.contributors.push_back(q);
      }
    }
    // Cannot happen on a grid with a non-empty complement; kept as a guard.
    if (step.contributors.empty()) throw ConfigError("OnionInpainter: mask pixel unreachable from complement");
    step.weight = 1.0 / double(step.contributors.size());
    resolved[std::size_t(t)] = 1;
    schedule_.push_back(std::move(step));
  }
}

Vec OnionInpainter::apply(const Vec& x) const {
  require_size(x.size(), mask_->n_pixels(), "OnionInpainter::apply");
  Vec out = x;
  for (const PeelStep& s : schedule_) {
    double acc = 0.0;
    for (Index q : s.contributors) acc += out[q];
    out[s.target] = acc * s.weight;
  }
  return out;
}

Vec OnionInpainter::fill(const Vec& complement_values) const {
  return mask_->restrict(apply(mask_->embed_complement(complement_values)));
}

Vec OnionInpainter::fill_adjoint(const Vec& mask_cotangent) const {
  Vec g = mask_->embed(mask_cotangent);
  for (auto it = schedule_.rbegin(); it != schedule_.rend(); ++it) {
    const double share = g[it->target] * it->weight;
    for (Index q : it->contributors) g[q] += share;
  }
  return mask_->restrict_complement(g);
}

Linearization OnionInpainter::linearize(const Vec& x) const {
  Linearization lin;
  lin.value = apply(x);
  lin.pullback = [this](const Vec& u) {
    require_size(u.size(), mask_->n_pixels(), "OnionInpainter::vjp");
    // J^T u = (M^c)^T (M^c u + L^T M u)
    Vec keep = mask_->restrict_complement(u);
    if (mask_->n_m() > 0) keep += fill_adjoint(mask_->restrict(u));
    return mask_->embed_complement(keep);
  };
  return lin;
}

OperatorPtr OnionInpainter::as_operator() const { return std::make_shared<OnionFillOperator>(*this); }

// ---------------------------------------------------------------------------
// Harmonic

HarmonicInpainter::HarmonicInpainter(std::shared_ptr<const StructureMask> mask, HarmonicOptions opts)
    : mask_(require_mask(std::move(mask), "HarmonicInpainter")), opts_(opts) {
  if (!(opts_.tol > 0.0)) throw DomainError("HarmonicInpainter: tol must be positive");
  const int n = mask_->n();
  const auto& idx = mask_->index_set();
  std::vector<Index> slot(std::size_t(mask_->n_pixels()), -1);
  for (std::size_t k = 0; k < idx.size(); ++k) slot[std::size_t(idx[k])] = Index(k);

  degree_.resize(idx.size());
  mask_nbrs_.resize(idx.size());
  comp_nbrs_.resize(idx.size());
  constexpr int dr[4] = {-1, 1, 0, 0};
  constexpr int dc[4] = {0, 0, -1, 1};
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const int r = int(idx[k] / n), c = int(idx[k] % n);
    for (int d = 0; d < 4; ++d) {
      const int rr = r + dr[d], cc = c + dc[d];
      if (rr < 0 || cc < 0 || rr >= n || cc >= n) continue;
      const Index q = Index(rr) * n + cc;
      ++degree_[k];
      if (slot[std::size_t(q)] >= 0) mask_nbrs_[k].push_back(slot[std::size_t(q)]);
      else comp_nbrs_[k].push_back(q);
    }
  }

  // Every mask pixel needs a 4-path to Dirichlet data, otherwise Jacobi stalls.
  std::vector<std::uint8_t> reached(idx.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (!comp_nbrs_[k].empty()) {
      reached[k] = 1;
      queue.push_back(k);
    }
  }
  while (!queue.empty()) {
    const std::size_t k = queue.front();
    queue.pop_front();
    for (Index j : mask_nbrs_[k]) {
      if (!reached[std::size_t(j)]) {
        reached[std::size_t(j)] = 1;
        queue.push_back(std::size_t(j));
      }
    }
  }
  if (std::find(reached.begin(), reached.end(), 0) != reached.end()) {
    throw ConfigError("HarmonicInpainter: mask has a component with no 4-connected path to the complement");
  }
}

namespace {

// Jacobi sweeps for deg_i q_i - sum_{j in mask nbrs} q_j = rhs_i.
Vec jacobi_solve(const std::vector<int>& degree, const std::vector<std::vector<Index>>& nbrs, const Vec& rhs,
                 Vec q, const HarmonicOptions& opts) {
  Vec next(q.size());
  for (int it = 0; it < opts.max_iter; ++it) {
    double max_update = 0.0;
    for (Index k = 0; k < q.size(); ++k) {
      double acc = rhs[k];
      for (Index j : nbrs[std::size_t(k)]) acc += q[j];
      next[k] = acc / degree[std::size_t(k)];
      max_update = std::max(max_update, std::abs(next[k] - q[k]));
    }
    q.swap(next);
    if (!(max_update >= opts.tol)) {
      if (!std::isfinite(max_update)) throw NumericalError("harmonic inpainting: non-finite Jacobi iterate");
      return q;
    }
  }
  throw NumericalError("harmonic inpainting: Jacobi did not reach tol within max_iter sweeps");
}

}  // namespace

Vec HarmonicInpainter::apply(const Vec& x) const {
  require_size(x.size(), mask_->n_pixels(), "HarmonicInpainter::apply");
  const Index nm = mask_->n_m();
  if (nm == 0) return x;
  Vec rhs(nm);
  double boundary_sum = 0.0;
  std::size_t boundary_count = 0;
  for (Index k = 0; k < nm; ++k) {
    double acc = 0.0;
    for (Index q : comp_nbrs_[std::size_t(k)]) acc += x[q];
    rhs[k] = acc;
    boundary_sum += acc;
    boundary_count += comp_nbrs_[std::size_t(k)].size();
  }
  // The starting guess depends on the complement only, so G(G(x)) = G(x) bitwise.
  const Vec start = Vec::Constant(nm, boundary_sum / double(boundary_count));
  const Vec q = jacobi_solve(degree_, mask_nbrs_, rhs, start, opts_);
  Vec out = x;
  const auto& idx = mask_->index_set();
  for (Index k = 0; k < nm; ++k) out[idx[std::size_t(k)]] = q[k];
  return out;
}

Vec HarmonicInpainter::pullback(const Vec& u) const {
  require_size(u.size(), mask_->n_pixels(), "HarmonicInpainter::vjp");
  Vec out = u;
  const auto& idx = mask_->index_set();
  for (Index p : idx) out[p] = 0.0;
  const Index nm = mask_->n_m();
  if (nm == 0) return out;
  // The mask block of the Laplacian is symmetric, so the adjoint solve reuses it.
  const Vec q = jacobi_solve(degree_, mask_nbrs_, mask_->restrict(u), Vec::Zero(nm), opts_);
  for (Index k = 0; k < nm; ++k) {
    for (Index c : comp_nbrs_[std::size_t(k)]) out[c] += q[k];
  }
  return out;
}

Linearization HarmonicInpainter::linearize(const Vec& x) const {
  return Linearization{apply(x), [this](const Vec& u) { return pullback(u); }};
}

Vec harmonic_inpaint(const Vec& x, const StructureMask& mask, double tol) {
  HarmonicOptions opts;
  opts.tol = tol;
  return HarmonicInpainter(std::make_shared<const StructureMask>(mask), opts).apply(x);
}

}  // namespace buqo
