#include "metamorph/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "metamorph/errors.hpp"

namespace metamorph {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    std::random_device rd;
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            fs::remove(tmp);
            throw Error("write failed for " + path);
        }
    }
    fs::rename(tmp, target);
}

void write_text_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

namespace {

bool has_extension(const std::string& path, const char* ext) {
    std::string e = fs::path(path).extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ext;
}

GrayRaster parse_pgm(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    std::size_t pos = 2;
    auto next_number = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw FormatError("malformed PGM header in " + path);
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            if (v > 1 << 24) throw FormatError("PGM header value too large in " + path);
        }
        return static_cast<int>(v);
    };
    GrayRaster r;
    r.width = next_number();
    r.height = next_number();
    const int maxval = next_number();
    if (maxval != 255) throw FormatError("only 8-bit PGM (maxval 255) is supported: " + path);
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("malformed PGM header in " + path);
    ++pos;
    const std::size_t count = static_cast<std::size_t>(r.width) * r.height;
    if (bytes.size() - pos < count) throw FormatError("truncated PGM data in " + path);
    r.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + count));
    return r;
}

GrayRaster parse_png(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw FormatError("cannot decode PNG " + path + ": " + img.message);
    if (img.format & PNG_FORMAT_FLAG_COLOR) {
        png_image_free(&img);
        throw FormatError("color PNG is not supported: " + path);
    }
    img.format = PNG_FORMAT_GRAY;
    GrayRaster r;
    r.width = static_cast<int>(img.width);
    r.height = static_cast<int>(img.height);
    r.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, r.pixels.data(), 0, nullptr))
        throw FormatError("cannot decode PNG " + path + ": " + img.message);
    return r;
}

std::vector<std::uint8_t> encode_png(const std::uint8_t* pixels, int width, int height, bool rgb) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels, 0, nullptr))
        throw Error(std::string("PNG encoding failed: ") + img.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels, 0, nullptr))
        throw Error(std::string("PNG encoding failed: ") + img.message);
    out.resize(size);
    return out;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t pos, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
    return v;
}

constexpr char kMagic[5] = {'M', 'D', 'E', 'F', '1'};
constexpr std::size_t kHeader = 5 + 3 * 4;

}  // namespace

GrayRaster read_gray(const std::string& path) {
    const auto bytes = read_file(path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return parse_pgm(bytes, path);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return parse_png(bytes, path);
    throw FormatError("unsupported image format (expected binary PGM or PNG): " + path);
}

void write_gray(const GrayRaster& raster, const std::string& path) {
    if (has_extension(path, ".png")) {
        write_file_atomic(path, encode_png(raster.pixels.data(), raster.width, raster.height, false));
    } else if (has_extension(path, ".pgm")) {
        const std::string header =
            "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n255\n";
        std::vector<std::uint8_t> out(header.begin(), header.end());
        out.insert(out.end(), raster.pixels.begin(), raster.pixels.end());
        write_file_atomic(path, out);
    } else {
        throw FormatError("unsupported output image extension: " + path);
    }
}

void write_rgb_png(const RgbRaster& raster, const std::string& path) {
    write_file_atomic(path, encode_png(raster.pixels.data(), raster.width, raster.height, true));
}

int nearest_valid_size(int size) {
    int best = 3;
    for (int m = 1; m < 16; ++m) {
        const int s = (1 << m) + 1;
        if (std::abs(s - size) < std::abs(best - size)) best = s;
    }
    return best;
}

Image load_image(const std::string& path) {
    const GrayRaster r = read_gray(path);
    int level = 0;
    while (level < 16 && (1 << level) + 1 < r.width) ++level;
    if (r.width != r.height || level < 1 || (1 << level) + 1 != r.width) {
        const int s = nearest_valid_size(std::max(r.width, r.height));
        throw DimensionError(path + " is " + std::to_string(r.width) + "x" + std::to_string(r.height) +
                             "; images must be square with side 2^M+1, nearest valid size is " +
                             std::to_string(s) + "x" + std::to_string(s));
    }
    std::vector<double> v(r.pixels.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = r.pixels[i] / 255.0;
    return Image(level, std::move(v));
}

GrayRaster quantize(const Image& u) {
    GrayRaster r;
    r.width = r.height = u.nodes_per_dim();
    r.pixels.resize(u.node_count());
    for (std::size_t i = 0; i < r.pixels.size(); ++i) {
        const double v = std::clamp(u.values()[i], 0.0, 1.0);
        r.pixels[i] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
    }
    return r;
}

void save_image(const Image& u, const std::string& path) { write_gray(quantize(u), path); }

GrayRaster resize_canvas(const GrayRaster& raster, int size) {
    if (raster.width < 1 || raster.height < 1) throw DimensionError("empty raster");
    GrayRaster out;
    out.width = out.height = size;
    out.pixels.resize(static_cast<std::size_t>(size) * size);
    const int ox = (raster.width - size) / 2, oy = (raster.height - size) / 2;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const int sx = std::clamp(c + ox, 0, raster.width - 1);
            const int sy = std::clamp(r + oy, 0, raster.height - 1);
            out.pixels[static_cast<std::size_t>(r) * size + c] =
                raster.pixels[static_cast<std::size_t>(sy) * raster.width + sx];
        }
    return out;
}

std::vector<std::uint8_t> encode_deformation(const Deformation& phi) {
    std::vector<std::uint8_t> out(kMagic, kMagic + 5);
    const auto side = static_cast<std::uint32_t>(phi.control_per_dim());
    put_u32(out, static_cast<std::uint32_t>(phi.level()));
    put_u32(out, side);
    put_u32(out, side);
    for (const Vec2& c : phi.control()) {
        put_f64(out, c.x);
        put_f64(out, c.y);
    }
    return out;
}

Deformation decode_deformation(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kHeader || !std::equal(kMagic, kMagic + 5, bytes.begin()))
        throw FormatError("not a deformation file (missing MDEF1 header)");
    const auto level = get_le(bytes, 5, 4), w = get_le(bytes, 9, 4), h = get_le(bytes, 13, 4);
    if (level < 1 || level > 14) throw FormatError("deformation level out of range: " + std::to_string(level));
    const std::uint64_t side = (std::uint64_t{1} << level) + 3;
    if (w != side || h != side)
        throw FormatError("control grid " + std::to_string(w) + "x" + std::to_string(h) + " does not match level " +
                          std::to_string(level));
    if (bytes.size() != kHeader + 16 * w * h)
        throw FormatError("deformation payload has " + std::to_string(bytes.size() - kHeader) + " bytes, expected " +
                          std::to_string(16 * w * h));
    std::vector<Vec2> control(w * h);
    for (std::size_t k = 0; k < control.size(); ++k) {
        control[k].x = std::bit_cast<double>(get_le(bytes, kHeader + 16 * k, 8));
        control[k].y = std::bit_cast<double>(get_le(bytes, kHeader + 16 * k + 8, 8));
    }
    return Deformation::from_control_grid(static_cast<int>(level), std::move(control));
}

void save_deformation(const Deformation& phi, const std::string& path) {
    write_file_atomic(path, encode_deformation(phi));
}

Deformation load_deformation(const std::string& path) { return decode_deformation(read_file(path)); }

}  // namespace metamorph
