#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ock/kinematics.hpp"
#include "ock/predictor.hpp"
#include "ock/scene.hpp"
#include "ock/slot_encoder.hpp"

namespace ock {

enum class EvalMethod {
    model,            // trained predictor rollout
    copy_last_slot,   // repeat the last burn-in slot set
    copy_last_frame,  // repeat the last burn-in frame verbatim
};

EvalMethod eval_method_from(const std::string& s);
std::string to_string(EvalMethod m);

// Mean-over-clips metrics for an H-step prediction from T burn-in frames.
// The per-frame vectors are the horizon curves.
struct EvalReport {
    std::string method;
    int64_t burn_in = 0;
    int64_t horizon = 0;
    int64_t clips = 0;
    std::vector<double> psnr_per_frame;
    std::vector<double> ssim_per_frame;
    std::vector<double> slot_error_per_frame;
    double mean_psnr = 0;
    double mean_ssim = 0;
    double fg_ari = 0;
    double miou = 0;
    double slot_error = 0;  // mean per-slot L2 gap to the encoder's slots

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

// Deterministic full rollout of one clip (no gradients).
struct RolloutResult {
    torch::Tensor slots;      // [H, N, D]
    torch::Tensor frames;     // [H, h, w, 3]
    torch::Tensor alphas;     // [H, N, h, w]
    torch::Tensor positions;  // [T+H, N, 2] decoded-soft-argmax trace, burn-in included
};

// Throws with the offending step index if predicted slots go non-finite.
RolloutResult rollout(const torch::Tensor& initial_frames, int64_t H, SlotEncoder& encoder,
                      Kinematics& kin, Predictor& predictor);

// Per-pixel argmax over slots, with the border-dominant slot relabeled 0 so maps
// compare naturally against ground truth. alphas [N,h,w] or [T,N,h,w].
torch::Tensor predicted_labels(const torch::Tensor& alphas);

// Per-clip rollout (or copy baseline) + per-frame metrics, averaged over clips.
// kin/predictor may be null for the copy baselines. Throws on an empty clip list.
EvalReport evaluate_rollout(const std::vector<VideoClip>& clips, int64_t T, int64_t H,
                            SlotEncoder& encoder, Kinematics* kin, Predictor* predictor,
                            EvalMethod method = EvalMethod::model);

}  // namespace ock
