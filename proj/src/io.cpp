#include "sparsect/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace sparsect::io {
namespace {

constexpr std::array<char, 4> kMagic{'S', 'C', 'T', '1'};

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) {
    const std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                         static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t read_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw std::runtime_error("unexpected end of file");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in) {
    const std::uint64_t lo = read_u32(in);
    const std::uint64_t hi = read_u32(in);
    return lo | (hi << 32);
}

float read_f32(std::istream& in) { return std::bit_cast<float>(read_u32(in)); }

void write_header(std::ostream& out, const RawHeader& h) {
    out.write(kMagic.data(), 4);
    write_u32(out, h.rows);
    write_u32(out, h.cols);
    write_u32(out, static_cast<std::uint32_t>(h.dtype));
}

RawHeader read_header(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4) || magic != kMagic) throw std::runtime_error("not an SCT1 container");
    RawHeader h;
    h.rows = read_u32(in);
    h.cols = read_u32(in);
    const auto tag = read_u32(in);
    if (tag != 1 && tag != 2) throw std::runtime_error("unknown SCT1 dtype tag " + std::to_string(tag));
    h.dtype = static_cast<DType>(tag);
    return h;
}

void write_raw(const Array2D& a, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_header(out, {static_cast<std::uint32_t>(a.rows()), static_cast<std::uint32_t>(a.cols()), DType::kFloat32});
    for (double v : a.values()) write_f32(out, static_cast<float>(v));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Array2D read_raw(const std::filesystem::path& path) {
    auto in = open_in(path);
    const RawHeader h = read_header(in);
    if (h.dtype != DType::kFloat32) throw std::runtime_error(path.string() + " is not a float32 array");
    Array2D a(h.rows, h.cols);
    for (double& v : a.values()) v = read_f32(in);
    return a;
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf.data(), end);
}

double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::runtime_error("invalid number '" + std::string(s) + "'");
    return v;
}

void write_csv(const Array2D& a, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            if (c) out << ',';
            out << format_double(a(r, c));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Array2D read_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<double> values;
    std::size_t rows = 0, cols = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::size_t count = 0;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            values.push_back(parse_double(rest.substr(0, comma)));
            ++count;
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (rows == 0) cols = count;
        else if (count != cols) throw std::runtime_error(path.string() + ": ragged CSV row " + std::to_string(rows + 1));
        ++rows;
    }
    return Array2D(rows, cols, std::move(values));
}

void write_png8(const Array2D& a, const std::filesystem::path& path, double lo, double hi) {
    if (!(hi > lo)) throw ConfigError("write_png8: empty display range");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng error writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(a.cols()), static_cast<png_uint_32>(a.rows()), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            const double t = std::clamp((a(r, c) - lo) / (hi - lo), 0.0, 1.0);
            row[c] = static_cast<png_byte>(std::lround(t * 255.0));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Gray16 read_png_gray(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng error reading " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error(path.string() + ": only grayscale PNG is supported");
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_swap(png);  // deliver native little-endian words
    png_read_update_info(png, info);
    Gray16 img;
    img.rows = png_get_image_height(png, info);
    img.cols = png_get_image_width(png, info);
    img.values.resize(img.rows * img.cols);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<png_byte> row(rowbytes);
    for (std::size_t r = 0; r < img.rows; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (std::size_t c = 0; c < img.cols; ++c) {
            if (depth == 16) {
                std::uint16_t v;
                std::memcpy(&v, row.data() + 2 * c, 2);
                img.values[r * img.cols + c] = v;
            } else {
                img.values[r * img.cols + c] = row[c];
            }
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png16(const Gray16& img, const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng error writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols), static_cast<png_uint_32>(img.rows), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(img.cols * 2);
    for (std::size_t r = 0; r < img.rows; ++r) {
        for (std::size_t c = 0; c < img.cols; ++c) {
            const std::uint16_t v = img.values[r * img.cols + c];
            row[2 * c] = static_cast<png_byte>(v >> 8);  // PNG is big-endian
            row[2 * c + 1] = static_cast<png_byte>(v & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Array2D load_array(const std::filesystem::path& path) {
    if (path.extension() == ".csv") return read_csv(path);
    return read_raw(path);
}

void save_array(const Array2D& a, const std::filesystem::path& path) {
    if (path.extension() == ".csv") write_csv(a, path);
    else write_raw(a, path);
}

}  // namespace sparsect::io
