#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sparsect/array2d.hpp"

namespace sparsect::io {

/// Raw container layout (all fields little-endian):
///   bytes 0..3   magic "SCT1"
///   bytes 4..7   u32 rows
///   bytes 8..11  u32 cols
///   bytes 12..15 u32 dtype tag
/// followed by the payload. Tag kFloat32 is a plain rows*cols float32 array;
/// tag kTensorBundle is a float32 payload of `cols` values holding `rows`
/// named tensors, followed by an index block (see nn/params.hpp).
enum class DType : std::uint32_t { kFloat32 = 1, kTensorBundle = 2 };

struct RawHeader {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    DType dtype = DType::kFloat32;
};

void write_header(std::ostream& out, const RawHeader& h);
RawHeader read_header(std::istream& in);
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f32(std::ostream& out, float v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
float read_f32(std::istream& in);

void write_raw(const Array2D& a, const std::filesystem::path& path);
Array2D read_raw(const std::filesystem::path& path);

/// Comma-separated, one line per row, '.' as decimal separator.
void write_csv(const Array2D& a, const std::filesystem::path& path);
Array2D read_csv(const std::filesystem::path& path);

/// Locale-independent shortest round-trip formatting.
std::string format_double(double v);
double parse_double(std::string_view s);

/// 8-bit grayscale preview; values are mapped linearly from [lo, hi] and clipped.
void write_png8(const Array2D& a, const std::filesystem::path& path, double lo = 0.0, double hi = 1.0);

struct Gray16 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint16_t> values;
};
/// Reads an 8- or 16-bit grayscale PNG; 8-bit samples are widened unchanged.
Gray16 read_png_gray(const std::filesystem::path& path);
void write_png16(const Gray16& img, const std::filesystem::path& path);

/// Loads an image from either container, chosen by extension (.csv or anything else = raw).
Array2D load_array(const std::filesystem::path& path);
void save_array(const Array2D& a, const std::filesystem::path& path);

}  // namespace sparsect::io
