#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace ock {

// 10*log10(1/MSE) for images in [0,1]; identical inputs return the 100 dB cap.
double psnr(const torch::Tensor& pred, const torch::Tensor& gt);

// Mean local structural similarity over valid 11x11 windows (Gaussian sigma 1.5,
// C1=0.01^2, C2=0.03^2 on unit range). Color inputs are reduced by channel mean.
// Throws if either side is smaller than the window.
double ssim(const torch::Tensor& pred, const torch::Tensor& gt);

// Adjusted Rand Index over pixels where gt != background_id, via the pair-counting
// contingency formula. Accepts [H,W] or [T,H,W] integer label maps.
// Throws when no foreground pixel exists.
double fg_ari(const torch::Tensor& pred_labels, const torch::Tensor& gt_labels,
              int64_t background_id);

// Mean IoU over ground-truth objects, with predicted labels assigned to objects by
// a matching that maximizes total IoU. The background id is unmatchable on both
// sides, so an object predicted as background scores 0.
double miou(const torch::Tensor& pred_labels, const torch::Tensor& gt_labels,
            int64_t gt_background_id = 0);

// Exact maximum-weight assignment on a dense [R,C] score matrix (bitmask DP over
// columns, so C must stay small; slot counts are). Returns, per row, the assigned
// column or -1 for rows left out of the optimum.
std::vector<int64_t> hungarian_max(const torch::Tensor& score);

// Spearman rank correlation; ties get average ranks. NaN if either side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace ock
