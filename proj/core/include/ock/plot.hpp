#pragma once

#include <torch/torch.h>

#include <array>
#include <string>
#include <vector>

namespace ock {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::array<float, 3> rgb{0.2f, 0.4f, 0.8f};
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    int width = 640;
    int height = 400;
};

// Renders axes, ticks, legend, and one polyline per series. NaN samples are skipped.
torch::Tensor render_plot(const PlotSpec& spec);

void write_plot(const std::string& path, const PlotSpec& spec);

// Side-by-side frame strip: each row is one sequence, each column one timestep.
// frames: list of [T,H,W,3] tensors, all with identical shapes.
torch::Tensor render_frame_strip(const std::vector<torch::Tensor>& rows,
                                 const std::vector<std::string>& row_labels,
                                 int max_cols = 12);

// Overlays per-object position traces on the last frame of a clip.
// positions: [T,N,2] in normalized (x,y); older samples fade out.
torch::Tensor render_trajectories(const torch::Tensor& frame, const torch::Tensor& positions);

}  // namespace ock
