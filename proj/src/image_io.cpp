#include "pano/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace pano {

namespace {

std::vector<unsigned char> to_rgb8(const ErpImage& img) {
    std::vector<unsigned char> buf(static_cast<std::size_t>(img.h) * img.w * 3);
    std::size_t o = 0;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c)
                buf[o++] = static_cast<unsigned char>(std::lround(std::clamp(img.at(c, y, x), 0.0, 1.0) * 255.0));
    return buf;
}

ErpImage from_rgb8(int h, int w, const unsigned char* buf) {
    ErpImage img(h, w);
    std::size_t o = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = buf[o++] / 255.0;
    return img;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

}  // namespace

void save_png(const ErpImage& img, const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("save_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("save_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("save_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("save_png: libpng error writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> buf = to_rgb8(img);
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.h));
    for (int y = 0; y < img.h; ++y) rows[static_cast<std::size_t>(y)] = &buf[static_cast<std::size_t>(y) * img.w * 3];
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ErpImage load_png(const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("load_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("load_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("load_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_png: libpng error reading " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * 3);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = &buf[static_cast<std::size_t>(y) * w * 3];
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return from_rgb8(h, w, buf.data());
}

void save_ppm(const ErpImage& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_ppm: cannot open " + path);
    os << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> buf = to_rgb8(img);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

ErpImage load_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_ppm: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P6") throw std::runtime_error("load_ppm: not a binary PPM: " + path);
    int w = 0, h = 0, maxval = 0;
    is >> w >> h >> maxval;
    if (w < 1 || h < 1 || maxval != 255) throw std::runtime_error("load_ppm: unsupported header in " + path);
    is.get();  // single whitespace after header
    std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * 3);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("load_ppm: truncated file " + path);
    return from_rgb8(h, w, buf.data());
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void save_image(const ErpImage& img, const std::string& path) {
    if (ends_with(path, ".png"))
        save_png(img, path);
    else if (ends_with(path, ".ppm"))
        save_ppm(img, path);
    else
        throw std::invalid_argument("save_image: unsupported extension in " + path);
}

ErpImage load_image(const std::string& path) {
    if (ends_with(path, ".png")) return load_png(path);
    if (ends_with(path, ".ppm")) return load_ppm(path);
    throw std::invalid_argument("load_image: unsupported extension in " + path);
}

void save_sidecar(const std::string& path, const std::map<std::string, std::string>& kv) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("save_sidecar: cannot open " + path);
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
}

std::map<std::string, std::string> load_sidecar(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_sidecar: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string k = line.substr(0, eq);
        std::string v = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        };
        trim(k);
        trim(v);
        if (!k.empty()) kv[k] = v;
    }
    return kv;
}

}  // namespace pano
