// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "depthdiff/core/errors.hpp"
#include "depthdiff/io/image_io.hpp"

namespace depthdiff::plot {
namespace {

// Simple blue-white-red ramp.
void colormap(double t, double rgb[3]) {
    t = std::min(1.0, std::max(0.0, t));
    if (t < 0.5) {
        const double u = t * 2.0;
        rgb[0] = 0.1 + 0.9 * u;
        rgb[1] = 0.2 + 0.8 * u;
        rgb[2] = 0.9;
    } else {
        const double u = (t - 0.5) * 2.0;
        rgb[0] = 1.0;
        rgb[1] = 1.0 - 0.8 * u;
        rgb[2] = 0.9 - 0.8 * u;
    }
}

// 3x5 bitmap glyphs for tick labels and short chart text.
const char* glyph(char c) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    switch (c) {
        case '0': return "111101101101111";
        case '1': return "010110010010111";
        case '2': return "111001111100111";
        case '3': return "111001111001111";
        case '4': return "101101111001001";
        case '5': return "111100111001111";
        case '6': return "111100111101111";
        case '7': return "111001010010010";
        case '8': return "111101111101111";
        case '9': return "111101111001111";
        case '.': return "000000000000010";
        case '-': return "000000111000000";
        case '+': return "000010111010000";
        case '=': return "000111000111000";
        case 'A': return "010101111101101";
        case 'B': return "110101110101110";
        case 'C': return "011100100100011";
        case 'D': return "110101101101110";
        case 'E': return "111100110100111";
        case 'F': return "111100110100100";
        case 'G': return "011100101101011";
        case 'H': return "101101111101101";
        case 'I': return "111010010010111";
        case 'K': return "101110100110101";
        case 'L': return "100100100100111";
        case 'M': return "101111111101101";
        case 'N': return "101111111111101";
        case 'O': return "010101101101010";
        case 'P': return "110101110100100";
        case 'R': return "110101110110101";
        case 'S': return "011100010001110";
        case 'T': return "111010010010010";
        case 'U': return "101101101101111";
        case 'V': return "101101101101010";
        case 'W': return "101101111111101";
        case 'X': return "101101010101101";
        case 'Y': return "101101010010010";
        default: return "000000000000000";
    }
}

struct Canvas {
    int h, w;
    std::vector<double> rgb;  // 3 planes

    Canvas(int h_, int w_) : h(h_), w(w_), rgb(3 * static_cast<size_t>(h_) * w_, 1.0) {}

    void set(int y, int x, const double color[3]) {
        if (y < 0 || y >= h || x < 0 || x >= w) return;
        for (int c = 0; c < 3; ++c)
            rgb[(static_cast<size_t>(c) * h + y) * w + x] = color[c];
    }

    void line(double x0, double y0, double x1, double y1, const double color[3]) {
        const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
        for (int i = 0; i <= steps; ++i) {
            const double t = static_cast<double>(i) / steps;
            set(static_cast<int>(std::lround(y0 + t * (y1 - y0))),
                static_cast<int>(std::lround(x0 + t * (x1 - x0))), color);
        }
    }

    void text(int y, int x, const std::string& s, const double color[3], int scale = 2) {
        for (char ch : s) {
            const char* g = glyph(ch);
            for (int gy = 0; gy < 5; ++gy)
                for (int gx = 0; gx < 3; ++gx)
                    if (g[gy * 3 + gx] == '1')
                        for (int sy = 0; sy < scale; ++sy)
                            for (int sx = 0; sx < scale; ++sx)
                                set(y + gy * scale + sy, x + gx * scale + sx, color);
            x += 4 * scale;
        }
    }

    void save(const std::filesystem::path& path) const {
        ImageRGB img(h, w);
        img.data = rgb;
        io::save_rgb_png(path, img);
    }
};

std::string format_tick(double v) {
    char buf[32];
    const double a = std::abs(v);
    if (v == 0.0)
        std::snprintf(buf, sizeof(buf), "0");
    else if (a >= 0.01 && a < 10000.0)
        std::snprintf(buf, sizeof(buf), "%.3g", v);
    else
        std::snprintf(buf, sizeof(buf), "%.1e", v);
    return buf;
}

}  // namespace

void save_heatmap(const std::filesystem::path& path, const std::vector<double>& grid, int h,
                  int w, double vmin, double vmax, int upscale) {
    if (grid.size() != static_cast<size_t>(h) * w)
        throw invalid_argument("save_heatmap: grid size mismatch");
    if (vmin == vmax) {
        vmin = grid[0];
        vmax = grid[0];
        for (double v : grid) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        if (vmin == vmax) vmax = vmin + 1.0;
    }
    ImageRGB img(h * upscale, w * upscale);
    for (int y = 0; y < h * upscale; ++y)
        for (int x = 0; x < w * upscale; ++x) {
            const double v = grid[static_cast<size_t>(y / upscale) * w + x / upscale];
            double rgb[3];
            colormap((v - vmin) / (vmax - vmin), rgb);
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = rgb[c];
        }
    io::save_rgb_png(path, img);
}

void save_depth_heatmap(const std::filesystem::path& path, const DepthMap& depth,
                        int upscale) {
    save_heatmap(path, depth.values, depth.h, depth.w, 0.0, 0.0, upscale);
}

void save_error_heatmap(const std::filesystem::path& path, const DepthMap& pred,
                        const DepthMap& gt, const TransparencyMask* mask, int upscale) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw invalid_argument("save_error_heatmap: shape mismatch");
    std::vector<double> err(pred.size(), 0.0);
    double vmax = 1e-9;
    for (int y = 0; y < pred.h; ++y)
        for (int x = 0; x < pred.w; ++x) {
            const size_t i = static_cast<size_t>(y) * pred.w + x;
            if (mask && !mask->at(y, x)) continue;
            err[i] = std::abs(pred.at(y, x) - gt.at(y, x));
            vmax = std::max(vmax, err[i]);
        }
    save_heatmap(path, err, pred.h, pred.w, 0.0, vmax, upscale);
}

void save_line_chart(const std::filesystem::path& path, const std::vector<Curve>& curves,
                     const std::string& title, int width, int height) {
    if (curves.empty()) throw invalid_argument("save_line_chart: no curves");
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& c : curves) {
        if (c.xs.size() != c.ys.size() || c.xs.empty())
            throw invalid_argument("save_line_chart: bad curve '" + c.label + "'");
        for (double v : c.xs) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : c.ys) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (xmin == xmax) xmax = xmin + 1.0;
    if (ymin == ymax) ymax = ymin + 1.0;
    ymin = std::min(0.0, ymin);

    Canvas canvas(height, width);
    const int ml = 70, mr = 20, mt = 30, mb = 40;  // margins
    const double black[3] = {0, 0, 0};
    const double palette[4][3] = {
        {0.85, 0.2, 0.15}, {0.15, 0.35, 0.8}, {0.1, 0.6, 0.25}, {0.6, 0.3, 0.7}};

    auto px = [&](double x) {
        return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
    };
    auto py = [&](double y) {
        return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
    };

    canvas.line(ml, height - mb, width - mr, height - mb, black);
    canvas.line(ml, mt, ml, height - mb, black);

    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        canvas.line(px(xv), height - mb, px(xv), height - mb + 4, black);
        canvas.text(height - mb + 8, static_cast<int>(px(xv)) - 10, format_tick(xv), black);
        canvas.line(ml - 4, py(yv), ml, py(yv), black);
        canvas.text(static_cast<int>(py(yv)) - 5, 6, format_tick(yv), black);
    }
    canvas.text(8, ml, title, black);

    for (size_t ci = 0; ci < curves.size(); ++ci) {
        const double* color = palette[ci % 4];
        const auto& c = curves[ci];
        for (size_t i = 0; i + 1 < c.xs.size(); ++i)
            canvas.line(px(c.xs[i]), py(c.ys[i]), px(c.xs[i + 1]), py(c.ys[i + 1]), color);
        // Legend swatch + label.
        const int ly = mt + 16 * static_cast<int>(ci);
        canvas.line(width - mr - 120, ly, width - mr - 100, ly, color);
        canvas.text(ly - 5, width - mr - 94, c.label, color);
    }
    canvas.save(path);
}

}  // namespace depthdiff::plot
