#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "ock/kinematics.hpp"
#include "ock/predictor.hpp"
#include "ock/scene.hpp"
#include "ock/slot_encoder.hpp"

namespace ock {

struct TrainConfig {
    double alpha = 1.0;       // weight of the image term in the combined loss
    double lr = 3e-4;
    int64_t steps = 400;
    int64_t batch_size = 8;
    bool teacher_forcing = false;
    uint64_t seed = 0;
    double grad_clip = 1.0;
    bool squared_losses = false;  // swap the plain L2 norms for squared norms
    int64_t log_every = 20;

    void validate() const;
};

// Mean over batch and leading steps of per-(step, slot) L2 norms:
// (1/(N*H)) sum_h sum_n ||pred - gt||_2. Inputs [..., H, N, D].
torch::Tensor object_loss(const torch::Tensor& pred_slots, const torch::Tensor& gt_slots,
                          bool squared = false);

// (1/H) sum_h ||decode(pred).combined - gt_frame||_2, decoder frozen.
// pred_slots [B,H,N,D], gt_frames [B,H,h,w,3].
torch::Tensor image_loss(const torch::Tensor& pred_slots, const torch::Tensor& gt_frames,
                         SlotEncoder& encoder, bool squared = false);

struct LossParts {
    torch::Tensor object;
    torch::Tensor image;
    torch::Tensor total;  // object + alpha * image
};

LossParts total_loss(const torch::Tensor& pred_slots, const torch::Tensor& gt_slots,
                     const torch::Tensor& gt_frames, SlotEncoder& encoder, double alpha,
                     bool squared = false);

// Differentiable multi-step unroll shared by training and evaluation.
// slots_obs [B,T_obs,N,D]: encoder slots of observed frames, T_obs >= T (>= T+H under
// teacher forcing). positions_obs [B,T_obs,N,2]: soft-argmax of their decoded masks.
// Each step re-derives kinematic states inside its own T-step window (zero vel/acc at
// the window start), so a prediction depends only on that window. Feedback appends the
// model's own slots and positions decoded from them, or, under teacher forcing, the
// observed ones. Returns predicted slots [B,H,N,D].
torch::Tensor unroll(Predictor& predictor, Kinematics& kin, SlotEncoder& encoder,
                     const torch::Tensor& slots_obs, const torch::Tensor& positions_obs,
                     int64_t T, int64_t H, bool teacher_forcing);

// Builds the kinematics tokens for one T-step window, or nullopt in baseline mode.
std::optional<torch::Tensor> window_kin_tokens(Kinematics& kin, const PredictorConfig& cfg,
                                               const torch::Tensor& window_positions);

struct TrainLogRow {
    int64_t step = 0;
    double l_object = 0, l_image = 0, l_total = 0;
    double wall_ms = 0;
};

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows);
std::vector<TrainLogRow> read_train_log(const std::string& path);

// Stage 1: reconstruction-only training of the slot encoder-decoder.
// Deterministic given cfg.seed in single-threaded mode. Aborts on non-finite loss.
SlotEncoder train_encoder(const std::vector<VideoClip>& clips, const EncoderConfig& enc_cfg,
                          const TrainConfig& cfg, std::vector<TrainLogRow>* log = nullptr);

struct PredictorBundle {
    Predictor predictor{nullptr};
    Kinematics kin{nullptr};
};

// Frozen-encoder view of a corpus: per-frame slots and the soft-argmax positions
// of their decoded masks. Stage 2 reads these instead of raw pixels, so encoding
// once and training several predictor variants against it avoids repeating the
// most expensive pass.
struct EncodedCorpus {
    torch::Tensor slots;      // [C, T, N, D]
    torch::Tensor positions;  // [C, T, N, 2]
};

// Runs the encoder over every clip in eval mode without gradients. Clips must
// share one shape.
EncodedCorpus encode_corpus(SlotEncoder& encoder, const std::vector<VideoClip>& clips,
                            int64_t chunk = 8);

// Stage 2: the encoder is frozen; the predictor, kinematics MLP, and lambda train
// against the combined slot + image objective over an H-step unroll.
PredictorBundle train_predictor(const std::vector<VideoClip>& clips, SlotEncoder& encoder,
                                const PredictorConfig& pred_cfg, const TrainConfig& cfg,
                                std::vector<TrainLogRow>* log = nullptr);

// Same stage with the encoding precomputed. `codes` must cover exactly `clips`.
PredictorBundle train_predictor(const std::vector<VideoClip>& clips, const EncodedCorpus& codes,
                                SlotEncoder& encoder, const PredictorConfig& pred_cfg,
                                const TrainConfig& cfg, std::vector<TrainLogRow>* log = nullptr);

}  // namespace ock
