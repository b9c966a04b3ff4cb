#pragma once

#include <torch/torch.h>

#include <array>
#include <string>

namespace ock {

// Writes an [H,W,3] float tensor with values in [0,1] as an 8-bit RGB PNG.
// Values outside [0,1] are clamped.
void write_png(const std::string& path, const torch::Tensor& img01);

// In-place drawing on [H,W,3] float images (normalized coordinates).
void draw_disc(torch::Tensor& img, double x, double y, double radius_px,
               const std::array<float, 3>& rgb, float alpha = 1.0f);
void draw_line(torch::Tensor& img, double x0, double y0, double x1, double y1,
               const std::array<float, 3>& rgb);

// 5x7 bitmap text, pixel coordinates, for plot annotations. Supports digits,
// upper/lowercase ASCII letters and . , - + = ( ) / % space.
void draw_text(torch::Tensor& img, int px, int py, const std::string& text,
               const std::array<float, 3>& rgb, int scale = 1);

}  // namespace ock
