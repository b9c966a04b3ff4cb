#include "ock/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "ock/image.hpp"

namespace ock {

namespace {

constexpr std::array<float, 3> kInk{0.15f, 0.15f, 0.18f};
constexpr std::array<float, 3> kGrid{0.85f, 0.85f, 0.88f};

const std::array<float, 3> kPalette[] = {
    {0.12f, 0.47f, 0.71f}, {0.89f, 0.29f, 0.20f}, {0.17f, 0.63f, 0.17f},
    {0.58f, 0.40f, 0.74f}, {0.55f, 0.34f, 0.29f}, {0.89f, 0.47f, 0.76f},
};

std::string format_tick(double v) {
    char buf[32];
    if (std::abs(v) >= 1000 || (std::abs(v) < 0.01 && v != 0)) {
        std::snprintf(buf, sizeof(buf), "%.1e", v);
    } else {
        std::snprintf(buf, sizeof(buf), "%.2f", v);
    }
    return buf;
}

// Round the raw data range out to friendly tick positions.
std::pair<double, double> nice_range(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = (hi - lo) * 0.05;
    return {lo - pad, hi + pad};
}

}  // namespace

torch::Tensor render_plot(const PlotSpec& spec) {
    const int w = spec.width;
    const int h = spec.height;
    torch::Tensor img = torch::ones({h, w, 3}, torch::kFloat32);

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : spec.series) {
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    std::tie(xmin, xmax) = nice_range(xmin, xmax);
    std::tie(ymin, ymax) = nice_range(ymin, ymax);

    // Plot area inside the margins reserved for labels.
    const double ml = 70.0 / w, mr = 15.0 / w, mt = 30.0 / h, mb = 45.0 / h;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (1.0 - ml - mr); };
    auto sy = [&](double y) { return 1.0 - mb - (y - ymin) / (ymax - ymin) * (1.0 - mt - mb); };

    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double tx = xmin + (xmax - xmin) * i / ticks;
        const double ty = ymin + (ymax - ymin) * i / ticks;
        draw_line(img, sx(tx), 1.0 - mb, sx(tx), mt, kGrid);
        draw_line(img, ml, sy(ty), 1.0 - mr, sy(ty), kGrid);
        draw_text(img, static_cast<int>(sx(tx) * w) - 12, h - 38, format_tick(tx), kInk);
        draw_text(img, 4, static_cast<int>(sy(ty) * h) - 3, format_tick(ty), kInk);
    }
    draw_line(img, ml, 1.0 - mb, 1.0 - mr, 1.0 - mb, kInk);
    draw_line(img, ml, 1.0 - mb, ml, mt, kInk);

    for (size_t si = 0; si < spec.series.size(); ++si) {
        const auto& s = spec.series[si];
        const auto& rgb = s.rgb[0] == 0.2f && s.rgb[1] == 0.4f && s.rgb[2] == 0.8f
                              ? kPalette[si % std::size(kPalette)]
                              : s.rgb;
        bool have_prev = false;
        double px = 0, py = 0;
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                have_prev = false;
                continue;
            }
            const double cx = sx(s.x[i]), cy = sy(s.y[i]);
            if (have_prev) draw_line(img, px, py, cx, cy, rgb);
            draw_disc(img, cx, cy, 2.0, rgb);
            px = cx;
            py = cy;
            have_prev = true;
        }
        draw_disc(img, ml + 0.02, mt + 0.035 * (si + 1), 3.0, rgb);
        draw_text(img, static_cast<int>((ml + 0.035) * w),
                  static_cast<int>((mt + 0.035 * (si + 1)) * h) - 3, s.label, kInk);
    }

    draw_text(img, static_cast<int>(ml * w), 8, spec.title, kInk);
    draw_text(img, w / 2 - static_cast<int>(spec.x_label.size()) * 3, h - 14, spec.x_label, kInk);
    draw_text(img, 4, 8, spec.y_label, kInk);
    return img;
}

void write_plot(const std::string& path, const PlotSpec& spec) {
    write_png(path, render_plot(spec));
}

torch::Tensor render_frame_strip(const std::vector<torch::Tensor>& rows,
                                 const std::vector<std::string>& row_labels, int max_cols) {
    if (rows.empty()) throw std::runtime_error("render_frame_strip: no rows");
    const auto t = rows[0].size(0);
    const auto fh = rows[0].size(1);
    const auto fw = rows[0].size(2);
    for (const auto& r : rows) {
        if (r.sizes() != rows[0].sizes()) {
            throw std::runtime_error("render_frame_strip: row shape mismatch");
        }
    }
    const int64_t cols = std::min<int64_t>(t, max_cols);
    const int64_t stride = std::max<int64_t>(1, t / cols);
    const int pad = 2;
    const int label_h = 12;
    const int64_t out_w = cols * (fw + pad) + pad;
    const int64_t out_h = static_cast<int64_t>(rows.size()) * (fh + pad + label_h) + pad;
    torch::Tensor img = torch::ones({out_h, out_w, 3}, torch::kFloat32) * 0.95f;
    for (size_t r = 0; r < rows.size(); ++r) {
        const int64_t y0 = pad + static_cast<int64_t>(r) * (fh + pad + label_h) + label_h;
        if (r < row_labels.size()) {
            draw_text(img, pad, static_cast<int>(y0 - label_h + 1), row_labels[r], kInk);
        }
        for (int64_t c = 0; c < cols; ++c) {
            const int64_t ti = std::min(t - 1, c * stride);
            const int64_t x0 = pad + c * (fw + pad);
            img.slice(0, y0, y0 + fh).slice(1, x0, x0 + fw) =
                rows[r][ti].to(torch::kFloat32).clamp(0, 1);
        }
    }
    return img;
}

torch::Tensor render_trajectories(const torch::Tensor& frame, const torch::Tensor& positions) {
    if (frame.dim() != 3 || positions.dim() != 3 || positions.size(2) != 2) {
        throw std::runtime_error("render_trajectories: expected [H,W,3] frame and [T,N,2] positions");
    }
    torch::Tensor img = frame.clone().to(torch::kFloat32);
    const auto t = positions.size(0);
    const auto n = positions.size(1);
    torch::Tensor pos = positions.to(torch::kFloat32).contiguous();
    auto p = pos.accessor<float, 3>();
    for (int64_t obj = 0; obj < n; ++obj) {
        const auto& rgb = kPalette[obj % std::size(kPalette)];
        for (int64_t i = 0; i < t; ++i) {
            const float fade = t > 1 ? static_cast<float>(i) / (t - 1) : 1.0f;
            draw_disc(img, p[i][obj][0], p[i][obj][1], 1.6, rgb, 0.25f + 0.75f * fade);
        }
    }
    return img;
}

}  // namespace ock
