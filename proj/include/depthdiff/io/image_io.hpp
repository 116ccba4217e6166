// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "depthdiff/core/types.hpp"

namespace depthdiff::io {

/// 8-bit interleaved RGB buffer as stored in PNG files.
struct RawRGB8 {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> pixels;  // h*w*3 interleaved
};

/// 16-bit single-channel buffer as stored in PNG files.
struct RawGray16 {
    int h = 0;
    int w = 0;
    std::vector<uint16_t> pixels;  // h*w
};

void write_png_rgb8(const std::filesystem::path& path, const RawRGB8& img);
RawRGB8 read_png_rgb8(const std::filesystem::path& path);

void write_png_gray16(const std::filesystem::path& path, const RawGray16& img);
RawGray16 read_png_gray16(const std::filesystem::path& path);

/// Depth persistence: 16-bit millimeters, value 0 = invalid observation.
void save_depth_png(const std::filesystem::path& path, const DepthMap& depth);
DepthMap load_depth_png(const std::filesystem::path& path);

void save_rgb_png(const std::filesystem::path& path, const ImageRGB& img);
ImageRGB load_rgb_png(const std::filesystem::path& path);

/// Masks are stored as 16-bit gray with 0 / 65535.
void save_mask_png(const std::filesystem::path& path, const TransparencyMask& mask);
TransparencyMask load_mask_png(const std::filesystem::path& path);

/// Simple binary float container: 16-byte header = magic "DDF1" + uint32 H,
/// W, channels (little endian), followed by H*W*channels float32 values in
/// plane-major (c, y, x) order.
void save_float_container(const std::filesystem::path& path, int h, int w, int channels,
                          const std::vector<double>& planes);
std::vector<double> load_float_container(const std::filesystem::path& path, int& h, int& w,
                                         int& channels);

}  // namespace depthdiff::io
