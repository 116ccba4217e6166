// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/io/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "depthdiff/core/errors.hpp"

namespace depthdiff::io {
namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw input_error("cannot open file: " + path.string());
    return f;
}

void write_png(const std::filesystem::path& path, int h, int w, int color_type,
               int bit_depth, const std::vector<png_bytep>& rows) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw input_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw input_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw input_error("png write failed: " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, w, h, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);  // buffers are host little-endian
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

}  // namespace

void write_png_rgb8(const std::filesystem::path& path, const RawRGB8& img) {
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() + static_cast<size_t>(y) * img.w * 3);
    write_png(path, img.h, img.w, PNG_COLOR_TYPE_RGB, 8, rows);
}

RawRGB8 read_png_rgb8(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw input_error("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw input_error("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) throw input_error("corrupt png: " + path.string());

    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);
    png_set_expand(r.png);
    png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);

    RawRGB8 img;
    img.h = static_cast<int>(png_get_image_height(r.png, r.info));
    img.w = static_cast<int>(png_get_image_width(r.png, r.info));
    if (png_get_rowbytes(r.png, r.info) != static_cast<size_t>(img.w) * 3)
        throw input_error("unexpected png row size: " + path.string());
    img.pixels.resize(static_cast<size_t>(img.h) * img.w * 3);
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y)
        rows[y] = img.pixels.data() + static_cast<size_t>(y) * img.w * 3;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

void write_png_gray16(const std::filesystem::path& path, const RawGray16& img) {
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y)
        rows[y] = reinterpret_cast<png_bytep>(
            const_cast<uint16_t*>(img.pixels.data() + static_cast<size_t>(y) * img.w));
    write_png(path, img.h, img.w, PNG_COLOR_TYPE_GRAY, 16, rows);
}

RawGray16 read_png_gray16(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw input_error("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw input_error("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) throw input_error("corrupt png: " + path.string());

    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(r.png, r.info) != 16)
        throw input_error("expected 16-bit gray png: " + path.string());
    png_set_swap(r.png);
    png_read_update_info(r.png, r.info);

    RawGray16 img;
    img.h = static_cast<int>(png_get_image_height(r.png, r.info));
    img.w = static_cast<int>(png_get_image_width(r.png, r.info));
    img.pixels.resize(static_cast<size_t>(img.h) * img.w);
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y)
        rows[y] =
            reinterpret_cast<png_bytep>(img.pixels.data() + static_cast<size_t>(y) * img.w);
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    return img;
}

void save_depth_png(const std::filesystem::path& path, const DepthMap& depth) {
    RawGray16 img;
    img.h = depth.h;
    img.w = depth.w;
    img.pixels.resize(depth.size());
    for (size_t i = 0; i < depth.size(); ++i) {
        if (!depth.valid[i]) {
            img.pixels[i] = 0;
            continue;
        }
        const double mm = std::lround(depth.values[i] * 1000.0);
        img.pixels[i] = static_cast<uint16_t>(std::min(std::max(mm, 1.0), 65535.0));
    }
    write_png_gray16(path, img);
}

DepthMap load_depth_png(const std::filesystem::path& path) {
    const RawGray16 img = read_png_gray16(path);
    DepthMap depth(img.h, img.w);
    for (size_t i = 0; i < img.pixels.size(); ++i) {
        if (img.pixels[i] == 0) {
            depth.values[i] = 0.0;
            depth.valid[i] = 0;
        } else {
            depth.values[i] = img.pixels[i] / 1000.0;
            depth.valid[i] = 1;
        }
    }
    return depth;
}

void save_rgb_png(const std::filesystem::path& path, const ImageRGB& img) {
    RawRGB8 raw;
    raw.h = img.h;
    raw.w = img.w;
    raw.pixels.resize(static_cast<size_t>(img.h) * img.w * 3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::min(std::max(img.at(c, y, x), 0.0), 1.0);
                raw.pixels[(static_cast<size_t>(y) * img.w + x) * 3 + c] =
                    static_cast<uint8_t>(std::lround(v * 255.0));
            }
    write_png_rgb8(path, raw);
}

ImageRGB load_rgb_png(const std::filesystem::path& path) {
    const RawRGB8 raw = read_png_rgb8(path);
    ImageRGB img(raw.h, raw.w);
    for (int y = 0; y < raw.h; ++y)
        for (int x = 0; x < raw.w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) =
                    raw.pixels[(static_cast<size_t>(y) * raw.w + x) * 3 + c] / 255.0;
    return img;
}

void save_mask_png(const std::filesystem::path& path, const TransparencyMask& mask) {
    RawGray16 img;
    img.h = mask.h;
    img.w = mask.w;
    img.pixels.resize(mask.mask.size());
    for (size_t i = 0; i < mask.mask.size(); ++i) img.pixels[i] = mask.mask[i] ? 65535 : 0;
    write_png_gray16(path, img);
}

TransparencyMask load_mask_png(const std::filesystem::path& path) {
    const RawGray16 img = read_png_gray16(path);
    TransparencyMask mask(img.h, img.w);
    for (size_t i = 0; i < img.pixels.size(); ++i) mask.mask[i] = img.pixels[i] != 0 ? 1 : 0;
    return mask;
}

void save_float_container(const std::filesystem::path& path, int h, int w, int channels,
                          const std::vector<double>& planes) {
    if (planes.size() != static_cast<size_t>(h) * w * channels)
        throw invalid_argument("save_float_container: size mismatch");
    FilePtr f = open_file(path, "wb");
    const char magic[4] = {'D', 'D', 'F', '1'};
    const uint32_t dims[3] = {static_cast<uint32_t>(h), static_cast<uint32_t>(w),
                              static_cast<uint32_t>(channels)};
    std::fwrite(magic, 1, 4, f.get());
    std::fwrite(dims, 4, 3, f.get());
    std::vector<float> buf(planes.size());
    for (size_t i = 0; i < planes.size(); ++i) buf[i] = static_cast<float>(planes[i]);
    if (std::fwrite(buf.data(), 4, buf.size(), f.get()) != buf.size())
        throw input_error("short write: " + path.string());
}

std::vector<double> load_float_container(const std::filesystem::path& path, int& h, int& w,
                                         int& channels) {
    FilePtr f = open_file(path, "rb");
    char magic[4];
    uint32_t dims[3];
    if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "DDF1", 4) != 0)
        throw input_error("bad float container magic: " + path.string());
    if (std::fread(dims, 4, 3, f.get()) != 3)
        throw input_error("truncated float container header: " + path.string());
    h = static_cast<int>(dims[0]);
    w = static_cast<int>(dims[1]);
    channels = static_cast<int>(dims[2]);
    const size_t n = static_cast<size_t>(h) * w * channels;
    std::vector<float> buf(n);
    if (std::fread(buf.data(), 4, n, f.get()) != n)
        throw input_error("truncated float container data: " + path.string());
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = buf[i];
    return out;
}

}  // namespace depthdiff::io
