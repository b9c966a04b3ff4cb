#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace ock {

struct EncoderConfig {
    int64_t num_slots = 3;  // objects + one background slot
    int64_t slot_dim = 64;
    int64_t feat_dim = 32;
    int64_t channels = 32;
    int64_t kernel = 5;
    std::array<int64_t, 4> strides{2, 2, 1, 1};
    int64_t iters_first = 3;   // attention iterations on the first frame
    int64_t iters_later = 2;   // iterations when warm-started from the previous frame
    int64_t dec_grid = 32;     // broadcast decoder works at dec_grid^2, then upsamples
    int64_t dec_hidden = 64;
    int64_t image_size = 64;
    double epsilon = 1e-8;

    void validate() const;
    int64_t grid_side() const;  // spatial side of the conv feature map
};

// One frame's flattened conv features, position-encoded.
struct FeatureGrid {
    torch::Tensor features;  // [M, feat_dim]
    std::pair<int64_t, int64_t> grid_shape;
};

struct SlotSet {
    torch::Tensor slots;  // [N, slot_dim]
    int64_t timestep = 0;
};

// Per-slot decoder output. alphas form a distribution over slots at every pixel.
struct MaskSet {
    torch::Tensor alphas;  // [N, H, W]
    torch::Tensor rgb;     // [N, H, W, 3]
};

class SlotEncoderImpl : public torch::nn::Module {
  public:
    explicit SlotEncoderImpl(EncoderConfig cfg);

    const EncoderConfig& config() const { return cfg_; }

    // Batched core. frames in [0,1]; a leading batch dimension is always present.
    torch::Tensor encode_features_batch(const torch::Tensor& frames);  // [B,H,W,3] -> [B,M,Df]

    // One attention iteration: softmax over the slot axis per cell, weighted mean
    // over cells, gated update, residual MLP. attn_out, if given, receives [B,N,M].
    torch::Tensor attention_step(const torch::Tensor& slots, const torch::Tensor& features,
                                 torch::Tensor* attn_out = nullptr);

    // Recurrent encoding: frame 0 starts from the learned queries, frame t+1 from
    // the slots of frame t. [B,T,H,W,3] -> [B,T,N,Ds].
    torch::Tensor encode_video_batch(const torch::Tensor& frames);

    // [B,N,Ds] -> (alphas [B,N,H,W], rgb [B,N,H,W,3], combined [B,H,W,3])
    std::tuple<torch::Tensor, torch::Tensor, torch::Tensor> decode_batch(
        const torch::Tensor& slots);

    // Single-clip wrappers over the batched core.
    FeatureGrid encode_features(const torch::Tensor& frame);
    SlotSet slot_attention_step(const SlotSet& slots, const FeatureGrid& grid);
    std::vector<SlotSet> encode_video(const torch::Tensor& frames);  // [T,H,W,3]
    std::pair<MaskSet, torch::Tensor> decode_slots(const SlotSet& slots);

    torch::Tensor initial_slots(int64_t batch) const;

  private:
    EncoderConfig cfg_;
    torch::nn::ModuleList conv_{nullptr};
    torch::nn::Linear pos_embed_{nullptr};      // maps (x,y,1-x,1-y) to feat_dim
    torch::nn::LayerNorm feat_norm_{nullptr};
    torch::nn::Linear feat_mlp1_{nullptr}, feat_mlp2_{nullptr};
    torch::Tensor slot_queries_;                // [N, slot_dim], learned init
    torch::nn::LayerNorm norm_slots_{nullptr}, norm_pre_mlp_{nullptr};
    torch::nn::Linear to_q_{nullptr}, to_k_{nullptr}, to_v_{nullptr};
    torch::nn::GRUCell gru_{nullptr};
    torch::nn::Linear slot_mlp1_{nullptr}, slot_mlp2_{nullptr};
    torch::nn::Linear dec_pos_embed_{nullptr};  // decoder-side position embedding
    torch::nn::Linear dec_fc1_{nullptr}, dec_fc2_{nullptr}, dec_fc3_{nullptr};
    torch::Tensor enc_coord_grid_;              // buffer [1,M,4]
    torch::Tensor dec_coord_grid_;              // buffer [1,G*G,4]

    torch::Tensor conv_features(const torch::Tensor& frames);
};

TORCH_MODULE(SlotEncoder);

// Coordinate channels (x, y, 1-x, 1-y) at pixel centers of an h×w grid, shape [h*w, 4].
torch::Tensor coordinate_channels(int64_t h, int64_t w);

}  // namespace ock
