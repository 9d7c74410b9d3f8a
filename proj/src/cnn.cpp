#include "buqo/inpaint.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace buqo {

static_assert(std::endian::native == std::endian::little, "GDNW I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'G', 'D', 'N', 'W'};
constexpr int K = int(CnnWeights::kKernel);
constexpr int kHalf = K / 2;

std::size_t weight_count(const CnnLayer& l) { return std::size_t(l.out_ch) * l.in_ch * l.kernel * l.kernel; }

std::string layer_name(std::size_t k) { return "layer " + std::to_string(k + 1); }

// --- layout checks shared by validate() and the parser ---------------------

void check_header(std::uint32_t version, float slope, std::uint32_t count, std::uint64_t base) {
  if (version != CnnWeights::kVersion) {
    throw FormatError("unsupported GDNW version " + std::to_string(version), base + 4);
  }
  if (!std::isfinite(slope) || slope < 0.0f || slope > 1.0f) {
    throw FormatError("leaky slope must be a finite value in [0, 1]", base + 8);
  }
  if (count != CnnWeights::kLayers) {
    throw FormatError("expected " + std::to_string(CnnWeights::kLayers) + " layers, found " + std::to_string(count),
                      base + 12);
  }
}

void check_layer_shape(const CnnLayer& l, std::size_t k, std::uint32_t width, std::uint64_t offset) {
  const LayerType expected = int(k) < CnnWeights::kConvLayers ? LayerType::conv : LayerType::gated;
  if (l.type != expected) {
    throw FormatError(layer_name(k) + ": expected " + (expected == LayerType::conv ? "conv" : "gated") + " layer",
                      offset);
  }
  if (l.kernel != CnnWeights::kKernel) throw FormatError(layer_name(k) + ": kernel must be 5", offset + 13);
  const std::uint32_t want_in = k == 0 ? 2u : width;
  const std::uint32_t want_out = k + 1 == std::size_t(CnnWeights::kLayers) ? 1u : width;
  if (width == 0) throw FormatError(layer_name(k) + ": zero hidden width", offset + 9);
  if (l.in_ch != want_in) {
    throw FormatError(layer_name(k) + ": in_channels " + std::to_string(l.in_ch) + ", expected " +
                          std::to_string(want_in),
                      offset + 5);
  }
  if (l.out_ch != want_out) {
    throw FormatError(layer_name(k) + ": out_channels " + std::to_string(l.out_ch) + ", expected " +
                          std::to_string(want_out),
                      offset + 9);
  }
}

// --- little-endian byte stream ---------------------------------------------

class Writer {
 public:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_floats(const std::vector<float>& v) {
    out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  }
  void put_raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  template <class T>
  T get(const std::string& what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::vector<float> get_floats(std::size_t count, const std::string& what) {
    need(count * sizeof(float), what);
    std::vector<float> v(count);
    std::memcpy(v.data(), bytes_.data() + pos_, count * sizeof(float));
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(v[i])) throw FormatError(what + ": non-finite value", pos_ + i * sizeof(float));
    }
    pos_ += count * sizeof(float);
    return v;
  }

 private:
  void need(std::size_t n, const std::string& what) {
    if (remaining() < n) throw FormatError("truncated file: missing " + what, pos_);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const char* p, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; files here are far below 4 GiB.
  crc = crc32(crc, reinterpret_cast<const Bytef*>(p), uInt(n));
  return std::uint32_t(crc);
}

}  // namespace

void validate(const CnnWeights& w) {
  check_header(CnnWeights::kVersion, w.slope, std::uint32_t(w.layers.size()), 0);
  const std::uint32_t width = w.width();
  for (std::size_t k = 0; k < w.layers.size(); ++k) {
    const CnnLayer& l = w.layers[k];
    check_layer_shape(l, k, width, 0);
    const bool gated = l.type == LayerType::gated;
    auto check = [&](const std::vector<float>& v, std::size_t want, const char* field) {
      if (v.size() != want) throw FormatError(layer_name(k) + ": " + field + " has wrong length", 0);
      for (float f : v) {
        if (!std::isfinite(f)) throw FormatError(layer_name(k) + ": " + field + " contains a non-finite value", 0);
      }
    };
    check(l.weight, weight_count(l), "feature weights");
    check(l.bias, l.out_ch, "feature bias");
    check(l.gate_weight, gated ? weight_count(l) : 0, "gate weights");
    check(l.gate_bias, gated ? l.out_ch : 0, "gate bias");
    check(l.scale, l.out_ch, "scale");
    check(l.shift, l.out_ch, "shift");
  }
}

std::string cnn_serialize(const CnnWeights& w) {
  validate(w);
  Writer out;
  out.put_raw(kMagic, 4);
  out.put<std::uint32_t>(CnnWeights::kVersion);
  out.put<float>(w.slope);
  out.put<std::uint32_t>(std::uint32_t(w.layers.size()));
  for (const CnnLayer& l : w.layers) {
    out.put<std::uint8_t>(std::uint8_t(l.type));
    out.put<std::uint32_t>(l.in_ch);
    out.put<std::uint32_t>(l.out_ch);
    out.put<std::uint32_t>(l.kernel);
    out.put_floats(l.weight);
    out.put_floats(l.bias);
    if (l.type == LayerType::gated) {
      out.put_floats(l.gate_weight);
      out.put_floats(l.gate_bias);
    }
    out.put_floats(l.scale);
    out.put_floats(l.shift);
  }
  const std::uint32_t crc = crc32_of(out.str().data(), out.str().size());
  out.put<std::uint32_t>(crc);
  return std::move(out.str());
}

CnnWeights cnn_parse(std::string_view bytes) {
  Reader in(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic, expected GDNW", 0);
  in.get<std::uint32_t>("magic");
  const auto version = in.get<std::uint32_t>("format version");
  const auto slope = in.get<float>("leaky slope");
  const auto count = in.get<std::uint32_t>("layer count");
  check_header(version, slope, count, 0);

  CnnWeights w;
  w.slope = slope;
  w.layers.resize(count);
  std::uint32_t width = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const std::string name = layer_name(k) + " of " + std::to_string(count);
    CnnLayer& l = w.layers[k];
    const std::uint64_t start = in.offset();
    const auto type = in.get<std::uint8_t>(name + " header");
    if (type > 1) throw FormatError(layer_name(k) + ": unknown layer type " + std::to_string(type), start);
    l.type = LayerType(type);
    l.in_ch = in.get<std::uint32_t>(name + " header");
    l.out_ch = in.get<std::uint32_t>(name + " header");
    l.kernel = in.get<std::uint32_t>(name + " header");
    if (k == 0) width = l.out_ch;
    check_layer_shape(l, k, width, start);
    l.weight = in.get_floats(weight_count(l), name + " feature weights");
    l.bias = in.get_floats(l.out_ch, name + " feature bias");
    if (l.type == LayerType::gated) {
      l.gate_weight = in.get_floats(weight_count(l), name + " gate weights");
      l.gate_bias = in.get_floats(l.out_ch, name + " gate bias");
    }
    l.scale = in.get_floats(l.out_ch, name + " scale");
    l.shift = in.get_floats(l.out_ch, name + " shift");
  }
  const std::uint64_t crc_offset = in.offset();
  const auto stored = in.get<std::uint32_t>("CRC32 trailer");
  if (in.remaining() != 0) throw FormatError("trailing bytes after CRC32", in.offset());
  if (stored != crc32_of(bytes.data(), std::size_t(crc_offset))) throw FormatError("CRC32 mismatch", crc_offset);
  return w;
}

CnnWeights cnn_load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open weight file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return cnn_parse(ss.str());
}

void cnn_save(const CnnWeights& w, const std::filesystem::path& path) {
  const std::string bytes = cnn_serialize(w);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write weight file " + path.string());
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw ConfigError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CnnWeights make_cnn_weights(std::uint32_t width, CnnInit init, std::uint64_t seed) {
  if (width < 1) throw ConfigError("make_cnn_weights: width must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  CnnWeights w;
  w.slope = init == CnnInit::linear_gate ? 1.0f : 0.2f;
  for (int k = 0; k < CnnWeights::kLayers; ++k) {
    CnnLayer l;
    l.type = k < CnnWeights::kConvLayers ? LayerType::conv : LayerType::gated;
    l.in_ch = k == 0 ? 2 : width;
    l.out_ch = k + 1 == CnnWeights::kLayers ? 1 : width;
    const std::size_t nw = weight_count(l);
    l.weight.assign(nw, 0.0f);
    l.bias.assign(l.out_ch, 0.0f);
    l.scale.assign(l.out_ch, 1.0f);
    l.shift.assign(l.out_ch, 0.0f);
    if (l.type == LayerType::gated) {
      l.gate_weight.assign(nw, 0.0f);
      l.gate_bias.assign(l.out_ch, 0.0f);
    }
    if (init != CnnInit::zero) {
      const double std_w = std::sqrt(2.0 / (double(l.in_ch) * K * K));
      for (float& v : l.weight) v = float(std_w * normal(rng));
      for (float& v : l.bias) v = float(0.05 * normal(rng));
      if (l.type == LayerType::gated) {
        if (init == CnnInit::random) {
          for (float& v : l.gate_weight) v = float(std_w * normal(rng));
          for (float& v : l.gate_bias) v = float(0.05 * normal(rng));
        } else {
          // sigmoid(50) rounds to 1 in double precision: the gate is constant.
          for (float& v : l.gate_bias) v = 50.0f;
        }
      }
      for (float& v : l.scale) v = float(1.0 + 0.1 * normal(rng));
      for (float& v : l.shift) v = float(0.05 * normal(rng));
    }
    w.layers.push_back(std::move(l));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Inference and reverse pass

namespace {

// out[o] = b[o] + sum_i W[o][i] (x) in[i], cross-correlation with zero padding.
void conv_forward(const std::vector<float>& W, const std::vector<float>& b, int cin, int cout, int n,
                  const std::vector<double>& in, std::vector<double>& out) {
  const std::size_t nn = std::size_t(n) * n;
  out.assign(std::size_t(cout) * nn, 0.0);
  for (int o = 0; o < cout; ++o) {
    double* dst_plane = out.data() + std::size_t(o) * nn;
    std::fill(dst_plane, dst_plane + nn, double(b[std::size_t(o)]));
    for (int i = 0; i < cin; ++i) {
      const double* src_plane = in.data() + std::size_t(i) * nn;
      for (int ky = 0; ky < K; ++ky) {
        for (int kx = 0; kx < K; ++kx) {
          const double w = W[((std::size_t(o) * cin + i) * K + ky) * K + kx];
          if (w == 0.0) continue;
          const int dy = ky - kHalf, dx = kx - kHalf;
          const int r0 = std::max(0, -dy), r1 = std::min(n, n - dy);
          const int c0 = std::max(0, -dx), c1 = std::min(n, n - dx);
          for (int r = r0; r < r1; ++r) {
            double* dst = dst_plane + std::size_t(r) * n;
            const double* src = src_plane + std::ptrdiff_t(r + dy) * n + dx;
            for (int c = c0; c < c1; ++c) dst[c] += w * src[c];
          }
        }
      }
    }
  }
}

// grad_in += W^T grad_out
void conv_transpose_add(const std::vector<float>& W, int cin, int cout, int n, const std::vector<double>& grad_out,
                        std::vector<double>& grad_in) {
  const std::size_t nn = std::size_t(n) * n;
  for (int o = 0; o < cout; ++o) {
    const double* src_plane = grad_out.data() + std::size_t(o) * nn;
    for (int i = 0; i < cin; ++i) {
      double* dst_plane = grad_in.data() + std::size_t(i) * nn;
      for (int ky = 0; ky < K; ++ky) {
        for (int kx = 0; kx < K; ++kx) {
          const double w = W[((std::size_t(o) * cin + i) * K + ky) * K + kx];
          if (w == 0.0) continue;
          const int dy = ky - kHalf, dx = kx - kHalf;
          const int r0 = std::max(0, -dy), r1 = std::min(n, n - dy);
          const int c0 = std::max(0, -dx), c1 = std::min(n, n - dx);
          for (int r = r0; r < r1; ++r) {
            const double* src = src_plane + std::size_t(r) * n;
            double* dst = dst_plane + std::ptrdiff_t(r + dy) * n + dx;
            for (int c = c0; c < c1; ++c) dst[c] += w * src[c];
          }
        }
      }
    }
  }
}

double sigmoid(double g) {
  if (g >= 0.0) return 1.0 / (1.0 + std::exp(-g));
  const double e = std::exp(g);
  return e / (1.0 + e);
}

bool is_last(std::size_t k) { return k + 1 == std::size_t(CnnWeights::kLayers); }

}  // namespace

CnnCache cnn_forward(const CnnWeights& w, const Vec& x, const StructureMask& mask) {
  if (w.layers.size() != std::size_t(CnnWeights::kLayers)) throw ShapeError("cnn_forward: weights are not loaded");
  require_size(x.size(), mask.n_pixels(), "cnn_forward: image vs mask");
  const int n = mask.n();
  const std::size_t nn = std::size_t(n) * n;
  const double slope = w.slope;

  CnnCache cache;
  cache.n = n;
  cache.mask = mask.pixels();
  cache.pre.resize(w.layers.size());
  cache.pre_gate.resize(w.layers.size());

  std::vector<double> h(2 * nn);
  for (std::size_t p = 0; p < nn; ++p) {
    const bool m = cache.mask[p] != 0;
    h[p] = m ? 0.0 : x[Index(p)];
    h[nn + p] = m ? 1.0 : 0.0;
  }

  std::vector<double> gate;
  for (std::size_t k = 0; k < w.layers.size(); ++k) {
    const CnnLayer& l = w.layers[k];
    if (h.size() != std::size_t(l.in_ch) * nn) throw ShapeError("cnn_forward: " + layer_name(k) + " width mismatch");
    std::vector<double>& a = cache.pre[k];
    conv_forward(l.weight, l.bias, int(l.in_ch), int(l.out_ch), n, h, a);
    if (l.type == LayerType::gated) conv_forward(l.gate_weight, l.gate_bias, int(l.in_ch), int(l.out_ch), n, h, gate);
    h.resize(a.size());
    for (std::uint32_t o = 0; o < l.out_ch; ++o) {
      const double s = l.scale[o], t = l.shift[o];
      for (std::size_t p = o * nn; p < (o + 1) * nn; ++p) {
        double f = a[p];
        // The output layer keeps a linear feature path.
        if (!is_last(k) && f < 0.0) f *= slope;
        if (l.type == LayerType::gated) f *= sigmoid(gate[p]);
        h[p] = s * f + t;
      }
    }
    if (l.type == LayerType::gated) cache.pre_gate[k] = std::move(gate);
  }

  cache.network = std::move(h);
  cache.output = x;
  for (Index p : mask.index_set()) cache.output[p] = cache.network[std::size_t(p)];
  cache.valid = true;
  return cache;
}

Vec cnn_apply(const CnnWeights& w, const Vec& x, const StructureMask& mask) {
  return cnn_forward(w, x, mask).output;
}

Vec cnn_vjp(const CnnWeights& w, const CnnCache& cache, const Vec& u) {
  if (!cache.valid) throw StateError("cnn_vjp: no forward cache; call cnn_forward first");
  const int n = cache.n;
  const std::size_t nn = std::size_t(n) * n;
  require_size(u.size(), Index(nn), "cnn_vjp: cotangent");
  const double slope = w.slope;

  // Cotangent of the network output: m (.) u.
  std::vector<double> grad(nn);
  for (std::size_t p = 0; p < nn; ++p) grad[p] = cache.mask[p] ? u[Index(p)] : 0.0;

  std::vector<double> da, dg, grad_in;
  for (std::size_t k = w.layers.size(); k-- > 0;) {
    const CnnLayer& l = w.layers[k];
    const std::vector<double>& a = cache.pre[k];
    const bool gated = l.type == LayerType::gated;
    da.assign(a.size(), 0.0);
    if (gated) dg.assign(a.size(), 0.0);
    for (std::uint32_t o = 0; o < l.out_ch; ++o) {
      const double s = l.scale[o];
      for (std::size_t p = o * nn; p < (o + 1) * nn; ++p) {
        const double df = s * grad[p];
        const bool linear = is_last(k) || a[p] >= 0.0;
        const double act = linear ? a[p] : slope * a[p];
        const double dact = linear ? 1.0 : slope;
        if (gated) {
          const double sg = sigmoid(cache.pre_gate[k][p]);
          da[p] = df * sg * dact;
          dg[p] = df * act * sg * (1.0 - sg);
        } else {
          da[p] = df * dact;
        }
      }
    }
    grad_in.assign(std::size_t(l.in_ch) * nn, 0.0);
    conv_transpose_add(l.weight, int(l.in_ch), int(l.out_ch), n, da, grad_in);
    if (gated) conv_transpose_add(l.gate_weight, int(l.in_ch), int(l.out_ch), n, dg, grad_in);
    grad.swap(grad_in);
  }

  // Only the image channel depends on x, through (1 - m).
  Vec out(static_cast<Index>(nn));
  for (std::size_t p = 0; p < nn; ++p) out[Index(p)] = cache.mask[p] ? 0.0 : u[Index(p)] + grad[p];
  return out;
}

CnnInpainter::CnnInpainter(std::shared_ptr<const CnnWeights> weights, std::shared_ptr<const StructureMask> mask)
    : weights_(std::move(weights)), mask_(std::move(mask)) {
  if (!weights_ || !mask_) throw ConfigError("CnnInpainter: null weights or mask");
  validate(*weights_);
}

Vec CnnInpainter::apply(const Vec& x) const { return cnn_apply(*weights_, x, *mask_); }

Linearization CnnInpainter::linearize(const Vec& x) const {
  auto cache = std::make_shared<CnnCache>(cnn_forward(*weights_, x, *mask_));
  Vec value = cache->output;
  return Linearization{std::move(value), [this, cache](const Vec& u) { return cnn_vjp(*weights_, *cache, u); }};
}

}  // namespace buqo
