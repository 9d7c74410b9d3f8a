#pragma once

#include "buqo/common.hpp"
#include "buqo/operators.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace buqo::io {

namespace fs = std::filesystem;

/// Write `bytes` to a temporary sibling, then rename over `path`.
/// Throws ConfigError naming the directory if it does not exist.
void atomic_write(const fs::path& path, std::string_view bytes);

std::string read_file(const fs::path& path);

std::uint32_t crc32(std::string_view bytes);
std::string crc32_hex(std::string_view bytes);

/// "IMGF", u32 width, u32 height, f32 row-major payload, little-endian.
std::string encode_imgf(const Vec& image, int width, int height);
Vec decode_imgf(std::string_view bytes, int* width = nullptr, int* height = nullptr);
void write_imgf(const fs::path& path, const Vec& image, int n);
/// Reads a square image; throws FormatError otherwise.
Vec read_imgf(const fs::path& path, int* n = nullptr);

/// Binary PGM (P5, maxval 255); pixels >= 128 belong to the structure.
std::string encode_pgm_mask(const StructureMask& mask);
StructureMask decode_pgm_mask(std::string_view bytes);
void write_pgm_mask(const fs::path& path, const StructureMask& mask);
StructureMask read_pgm_mask(const fs::path& path);

/// "CPLX", u32 length, interleaved f32 (re, im).
std::string encode_cplx(const CVec& v);
CVec decode_cplx(std::string_view bytes);
void write_cplx(const fs::path& path, const CVec& v);
CVec read_cplx(const fs::path& path);

/// 8-bit grayscale PNG.
std::string encode_png_gray(const std::vector<std::uint8_t>& pixels, int width, int height);
void write_png_gray(const fs::path& path, const std::vector<std::uint8_t>& pixels, int width, int height);

/// Image in [0, 1] mapped linearly to 0..255.
std::vector<std::uint8_t> to_gray8(const Vec& image);
/// log10(max(|a - b|, 1e-6)) mapped from [-6, 0] to 0..255.
std::vector<std::uint8_t> log_difference(const Vec& a, const Vec& b);

}  // namespace buqo::io
