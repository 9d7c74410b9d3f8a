#include "buqo/io.hpp"

#include <png.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace buqo::io {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace {

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(std::string_view bytes, std::size_t offset, const char* what) {
  if (bytes.size() < offset + sizeof(T)) throw FormatError(std::string("truncated file: missing ") + what, offset);
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

void expect_magic(std::string_view bytes, const char* magic) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(magic, 4)) {
    throw FormatError(std::string("bad magic, expected ") + magic, 0);
  }
}

}  // namespace

void atomic_write(const fs::path& path, std::string_view bytes) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (!fs::is_directory(dir)) throw ConfigError("output directory does not exist: " + dir.string());
  const fs::path tmp = dir / (path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + tmp.string());
    f.write(bytes.data(), std::streamsize(bytes.size()));
    f.flush();
    if (!f) throw ConfigError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::uint32_t crc32(std::string_view bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  return std::uint32_t(::crc32(c, reinterpret_cast<const Bytef*>(bytes.data()), uInt(bytes.size())));
}

std::string crc32_hex(std::string_view bytes) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc32(bytes));
  return buf;
}

// --- IMGF -------------------------------------------------------------------

std::string encode_imgf(const Vec& image, int width, int height) {
  require_size(image.size(), Index(width) * height, "encode_imgf");
  if (!image.allFinite()) throw NumericalError("encode_imgf: image contains non-finite values");
  std::string out("IMGF");
  put<std::uint32_t>(out, std::uint32_t(width));
  put<std::uint32_t>(out, std::uint32_t(height));
  for (Index i = 0; i < image.size(); ++i) put<float>(out, float(image[i]));
  return out;
}

Vec decode_imgf(std::string_view bytes, int* width, int* height) {
  expect_magic(bytes, "IMGF");
  const auto w = get<std::uint32_t>(bytes, 4, "width");
  const auto h = get<std::uint32_t>(bytes, 8, "height");
  if (w == 0 || h == 0 || w > 65536 || h > 65536) throw FormatError("implausible image dimensions", 4);
  const std::size_t count = std::size_t(w) * h;
  if (bytes.size() != 12 + 4 * count) {
    throw FormatError("payload length " + std::to_string(bytes.size() - 12) + " does not match " +
                          std::to_string(w) + "x" + std::to_string(h) + " f32 pixels",
                      std::min<std::size_t>(bytes.size(), 12 + 4 * count));
  }
  Vec img(static_cast<Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const float v = get<float>(bytes, 12 + 4 * i, "pixel");
    if (!std::isfinite(v)) throw FormatError("non-finite pixel value", 12 + 4 * i);
    img[Index(i)] = v;
  }
  if (width) *width = int(w);
  if (height) *height = int(h);
  return img;
}

void write_imgf(const fs::path& path, const Vec& image, int n) { atomic_write(path, encode_imgf(image, n, n)); }

Vec read_imgf(const fs::path& path, int* n) {
  int w = 0, h = 0;
  Vec img = decode_imgf(read_file(path), &w, &h);
  if (w != h) throw FormatError(path.string() + ": image is not square", 4);
  if (n) *n = w;
  return img;
}

// --- PGM masks ----------------------------------------------------------------

std::string encode_pgm_mask(const StructureMask& mask) {
  std::string out = "P5\n" + std::to_string(mask.n()) + " " + std::to_string(mask.n()) + "\n255\n";
  for (std::uint8_t p : mask.pixels()) out.push_back(char(p ? 255 : 0));
  return out;
}

StructureMask decode_pgm_mask(std::string_view bytes) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != "P5") throw FormatError("bad magic, expected binary PGM (P5)", 0);
  std::size_t pos = 2;
  auto next_int = [&](const char* what) {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) throw FormatError(std::string("PGM ") + what + " out of range", start);
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("PGM header: expected ") + what, start);
    return v;
  };
  const long w = next_int("width");
  const long h = next_int("height");
  const long maxval = next_int("maxval");
  if (w != h || w < 1) throw FormatError("PGM mask must be square and non-empty", 2);
  if (maxval != 255) throw FormatError("PGM maxval must be 255", pos);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("PGM header not terminated by whitespace", pos);
  }
  ++pos;
  const std::size_t count = std::size_t(w) * std::size_t(h);
  if (bytes.size() - pos != count) {
    throw FormatError("PGM payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                          std::to_string(count),
                      pos);
  }
  std::vector<std::uint8_t> px(count);
  for (std::size_t i = 0; i < count; ++i) px[i] = static_cast<unsigned char>(bytes[pos + i]) >= 128 ? 1 : 0;
  return StructureMask(int(w), std::move(px));
}

void write_pgm_mask(const fs::path& path, const StructureMask& mask) { atomic_write(path, encode_pgm_mask(mask)); }

StructureMask read_pgm_mask(const fs::path& path) { return decode_pgm_mask(read_file(path)); }

// --- CPLX -----------------------------------------------------------------------

std::string encode_cplx(const CVec& v) {
  std::string out("CPLX");
  put<std::uint32_t>(out, std::uint32_t(v.size()));
  for (Index i = 0; i < v.size(); ++i) {
    put<float>(out, float(v[i].real()));
    put<float>(out, float(v[i].imag()));
  }
  return out;
}

CVec decode_cplx(std::string_view bytes) {
  expect_magic(bytes, "CPLX");
  const auto len = get<std::uint32_t>(bytes, 4, "length");
  if (bytes.size() != 8 + 8 * std::size_t(len)) {
    throw FormatError("payload length does not match declared " + std::to_string(len) + " complex values",
                      std::min<std::size_t>(bytes.size(), 8 + 8 * std::size_t(len)));
  }
  CVec v(static_cast<Index>(len));
  for (std::size_t i = 0; i < len; ++i) {
    const float re = get<float>(bytes, 8 + 8 * i, "real part");
    const float im = get<float>(bytes, 12 + 8 * i, "imaginary part");
    if (!std::isfinite(re) || !std::isfinite(im)) throw FormatError("non-finite value", 8 + 8 * i);
    v[Index(i)] = Complex(re, im);
  }
  return v;
}

void write_cplx(const fs::path& path, const CVec& v) { atomic_write(path, encode_cplx(v)); }

CVec read_cplx(const fs::path& path) { return decode_cplx(read_file(path)); }

// --- PNG ------------------------------------------------------------------------

std::string encode_png_gray(const std::vector<std::uint8_t>& pixels, int width, int height) {
  if (pixels.size() != std::size_t(width) * std::size_t(height)) throw ShapeError("encode_png_gray: size mismatch");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(width);
  image.height = png_uint_32(height);
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), width, nullptr)) {
    throw std::runtime_error(std::string("PNG encoding failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), width, nullptr)) {
    throw std::runtime_error(std::string("PNG encoding failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_png_gray(const fs::path& path, const std::vector<std::uint8_t>& pixels, int width, int height) {
  atomic_write(path, encode_png_gray(pixels, width, height));
}

std::vector<std::uint8_t> to_gray8(const Vec& image) {
  std::vector<std::uint8_t> px(std::size_t(image.size()));
  for (Index i = 0; i < image.size(); ++i) {
    px[std::size_t(i)] = std::uint8_t(std::lround(255.0 * std::clamp(image[i], 0.0, 1.0)));
  }
  return px;
}

std::vector<std::uint8_t> log_difference(const Vec& a, const Vec& b) {
  require_size(a.size(), b.size(), "log_difference");
  std::vector<std::uint8_t> px(std::size_t(a.size()));
  for (Index i = 0; i < a.size(); ++i) {
    const double l = std::log10(std::max(std::abs(a[i] - b[i]), 1e-6));
    px[std::size_t(i)] = std::uint8_t(std::lround(255.0 * std::clamp((l + 6.0) / 6.0, 0.0, 1.0)));
  }
  return px;
}

}  // namespace buqo::io
