#include "ock/image.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace ock {

namespace {

struct Glyph {
    char ch;
    unsigned char col[5];  // column-major, bit 0 = top row
};

// Classic 5x7 terminal font, subset needed for plot annotations.
const Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'%', {0x23, 0x13, 0x08, 0x64, 0x62}},
    {'(', {0x00, 0x1C, 0x22, 0x41, 0x00}}, {')', {0x00, 0x41, 0x22, 0x1C, 0x00}},
    {'+', {0x08, 0x08, 0x3E, 0x08, 0x08}}, {',', {0x00, 0x50, 0x30, 0x00, 0x00}},
    {'-', {0x08, 0x08, 0x08, 0x08, 0x08}}, {'.', {0x00, 0x60, 0x60, 0x00, 0x00}},
    {'/', {0x20, 0x10, 0x08, 0x04, 0x02}}, {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}},
    {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}}, {'2', {0x42, 0x61, 0x51, 0x49, 0x46}},
    {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}}, {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}},
    {'5', {0x27, 0x45, 0x45, 0x45, 0x39}}, {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}},
    {'7', {0x01, 0x71, 0x09, 0x05, 0x03}}, {'8', {0x36, 0x49, 0x49, 0x49, 0x36}},
    {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}}, {':', {0x00, 0x36, 0x36, 0x00, 0x00}},
    {'=', {0x14, 0x14, 0x14, 0x14, 0x14}}, {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}},
    {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}}, {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}},
    {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}}, {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}},
    {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}}, {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}},
    {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}}, {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}},
    {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}}, {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}},
    {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}}, {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}},
    {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}}, {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}},
    {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}}, {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}},
    {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}}, {'S', {0x46, 0x49, 0x49, 0x49, 0x31}},
    {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}}, {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}},
    {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}}, {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}},
    {'X', {0x63, 0x14, 0x08, 0x14, 0x63}}, {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}},
    {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
};

const Glyph* find_glyph(char c) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (const auto& g : kFont) {
        if (g.ch == c) return &g;
    }
    return nullptr;
}

void blend_pixel(torch::TensorAccessor<float, 3> a, int row, int col,
                 const std::array<float, 3>& rgb, float alpha) {
    if (row < 0 || col < 0 || row >= a.size(0) || col >= a.size(1)) return;
    for (int c = 0; c < 3; ++c) {
        a[row][col][c] = a[row][col][c] * (1.0f - alpha) + rgb[c] * alpha;
    }
}

}  // namespace

void write_png(const std::string& path, const torch::Tensor& img01) {
    if (img01.dim() != 3 || img01.size(2) != 3) {
        throw std::runtime_error("write_png: expected [H,W,3] tensor");
    }
    torch::Tensor img = (img01.to(torch::kFloat32).clamp(0, 1) * 255.0f + 0.5f)
                            .to(torch::kUInt8)
                            .contiguous();
    const int h = static_cast<int>(img.size(0));
    const int w = static_cast<int>(img.size(1));

    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("write_png: libpng failure for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    auto* data = img.data_ptr<uint8_t>();
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int r = 0; r < h; ++r) {
        rows[static_cast<size_t>(r)] = const_cast<png_bytep>(data + static_cast<size_t>(r) * w * 3);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

void draw_disc(torch::Tensor& img, double x, double y, double radius_px,
               const std::array<float, 3>& rgb, float alpha) {
    auto a = img.accessor<float, 3>();
    const int h = static_cast<int>(a.size(0));
    const int w = static_cast<int>(a.size(1));
    const double cx = x * w - 0.5;
    const double cy = y * h - 0.5;
    const int r = static_cast<int>(std::ceil(radius_px)) + 1;
    for (int dr = -r; dr <= r; ++dr) {
        for (int dc = -r; dc <= r; ++dc) {
            const int row = static_cast<int>(std::lround(cy)) + dr;
            const int col = static_cast<int>(std::lround(cx)) + dc;
            const double d = std::hypot(col - cx, row - cy);
            if (d <= radius_px) blend_pixel(a, row, col, rgb, alpha);
        }
    }
}

void draw_line(torch::Tensor& img, double x0, double y0, double x1, double y1,
               const std::array<float, 3>& rgb) {
    auto a = img.accessor<float, 3>();
    const int h = static_cast<int>(a.size(0));
    const int w = static_cast<int>(a.size(1));
    const double px0 = x0 * w, py0 = y0 * h, px1 = x1 * w, py1 = y1 * h;
    const int steps = std::max(2, static_cast<int>(std::hypot(px1 - px0, py1 - py0)) * 2);
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        blend_pixel(a, static_cast<int>(py0 + (py1 - py0) * t),
                    static_cast<int>(px0 + (px1 - px0) * t), rgb, 1.0f);
    }
}

void draw_text(torch::Tensor& img, int px, int py, const std::string& text,
               const std::array<float, 3>& rgb, int scale) {
    auto a = img.accessor<float, 3>();
    int x = px;
    for (char c : text) {
        const Glyph* g = find_glyph(c);
        if (g) {
            for (int col = 0; col < 5; ++col) {
                for (int row = 0; row < 7; ++row) {
                    if ((g->col[col] >> row) & 1) {
                        for (int sy = 0; sy < scale; ++sy) {
                            for (int sx = 0; sx < scale; ++sx) {
                                blend_pixel(a, py + row * scale + sy, x + col * scale + sx, rgb,
                                            1.0f);
                            }
                        }
                    }
                }
            }
        }
        x += 6 * scale;
    }
}

}  // namespace ock
