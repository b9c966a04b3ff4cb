#include "ock/slot_encoder.hpp"

#include <stdexcept>
#include <string>

namespace ock {

void EncoderConfig::validate() const {
    if (num_slots < 1) throw std::invalid_argument("encoder: num_slots must be >= 1");
    if (slot_dim < 1 || feat_dim < 1 || channels < 1 || dec_hidden < 1) {
        throw std::invalid_argument("encoder: dimensions must be positive");
    }
    if (kernel < 1 || kernel % 2 == 0) {
        throw std::invalid_argument("encoder: kernel must be odd and positive");
    }
    if (iters_first < 1 || iters_later < 1) {
        throw std::invalid_argument("encoder: attention iteration counts must be >= 1");
    }
    if (image_size < 8) throw std::invalid_argument("encoder: image_size must be >= 8");
    if (dec_grid < 2 || dec_grid > image_size) {
        throw std::invalid_argument("encoder: dec_grid must lie in [2, image_size]");
    }
    int64_t side = image_size;
    for (int64_t s : strides) {
        if (s < 1) throw std::invalid_argument("encoder: strides must be >= 1");
        if (side % s != 0) {
            throw std::invalid_argument("encoder: image_size not divisible by stride product");
        }
        side /= s;
    }
    if (side < 1) throw std::invalid_argument("encoder: feature grid collapsed to zero");
    if (epsilon <= 0) throw std::invalid_argument("encoder: epsilon must be positive");
}

int64_t EncoderConfig::grid_side() const {
    int64_t side = image_size;
    for (int64_t s : strides) side /= s;
    return side;
}

torch::Tensor coordinate_channels(int64_t h, int64_t w) {
    torch::Tensor ys = (torch::arange(h, torch::kFloat32) + 0.5f) / static_cast<float>(h);
    torch::Tensor xs = (torch::arange(w, torch::kFloat32) + 0.5f) / static_cast<float>(w);
    auto grid = torch::meshgrid({ys, xs}, "ij");
    torch::Tensor y = grid[0].reshape({-1});
    torch::Tensor x = grid[1].reshape({-1});
    return torch::stack({x, y, 1.0f - x, 1.0f - y}, /*dim=*/1);
}

SlotEncoderImpl::SlotEncoderImpl(EncoderConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    conv_ = register_module("conv", torch::nn::ModuleList());
    int64_t in_ch = 3;
    for (size_t i = 0; i < cfg_.strides.size(); ++i) {
        conv_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, cfg_.channels, cfg_.kernel)
                                               .stride(cfg_.strides[i])
                                               .padding(cfg_.kernel / 2)));
        in_ch = cfg_.channels;
    }
    pos_embed_ = register_module("pos_embed", torch::nn::Linear(4, cfg_.channels));
    feat_norm_ = register_module(
        "feat_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg_.channels})));
    feat_mlp1_ = register_module("feat_mlp1", torch::nn::Linear(cfg_.channels, cfg_.feat_dim));
    feat_mlp2_ = register_module("feat_mlp2", torch::nn::Linear(cfg_.feat_dim, cfg_.feat_dim));

    slot_queries_ = register_parameter(
        "slot_queries", torch::randn({cfg_.num_slots, cfg_.slot_dim}) * 0.5);
    norm_slots_ = register_module(
        "norm_slots", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg_.slot_dim})));
    norm_pre_mlp_ = register_module(
        "norm_pre_mlp", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg_.slot_dim})));
    to_q_ = register_module("to_q", torch::nn::Linear(cfg_.slot_dim, cfg_.slot_dim));
    to_k_ = register_module("to_k", torch::nn::Linear(cfg_.feat_dim, cfg_.slot_dim));
    to_v_ = register_module("to_v", torch::nn::Linear(cfg_.feat_dim, cfg_.slot_dim));
    gru_ = register_module("gru", torch::nn::GRUCell(cfg_.slot_dim, cfg_.slot_dim));
    slot_mlp1_ = register_module("slot_mlp1", torch::nn::Linear(cfg_.slot_dim, cfg_.slot_dim * 2));
    slot_mlp2_ = register_module("slot_mlp2", torch::nn::Linear(cfg_.slot_dim * 2, cfg_.slot_dim));

    dec_pos_embed_ = register_module("dec_pos_embed", torch::nn::Linear(4, cfg_.slot_dim));
    dec_fc1_ = register_module("dec_fc1", torch::nn::Linear(cfg_.slot_dim, cfg_.dec_hidden));
    dec_fc2_ = register_module("dec_fc2", torch::nn::Linear(cfg_.dec_hidden, cfg_.dec_hidden));
    dec_fc3_ = register_module("dec_fc3", torch::nn::Linear(cfg_.dec_hidden, 4));

    const int64_t side = cfg_.grid_side();
    enc_coord_grid_ = register_buffer("enc_coord_grid",
                                      coordinate_channels(side, side).unsqueeze(0));
    dec_coord_grid_ = register_buffer(
        "dec_coord_grid", coordinate_channels(cfg_.dec_grid, cfg_.dec_grid).unsqueeze(0));
}

torch::Tensor SlotEncoderImpl::conv_features(const torch::Tensor& frames) {
    torch::Tensor x = frames.permute({0, 3, 1, 2});  // [B,3,H,W]
    for (const auto& m : *conv_) {
        x = torch::relu(m->as<torch::nn::Conv2d>()->forward(x));
    }
    return x;  // [B,C,H',W']
}

torch::Tensor SlotEncoderImpl::encode_features_batch(const torch::Tensor& frames) {
    if (frames.dim() != 4 || frames.size(3) != 3) {
        throw std::invalid_argument("encoder: expected frames [B,H,W,3]");
    }
    if (!frames.isfinite().all().item<bool>()) {
        throw std::invalid_argument("encoder: non-finite frame values");
    }
    torch::Tensor x = conv_features(frames);             // [B,C,H',W']
    x = x.flatten(2).transpose(1, 2);                    // [B,M,C]
    x = x + pos_embed_->forward(enc_coord_grid_);        // learned 2D position code
    x = feat_norm_->forward(x);
    x = feat_mlp2_->forward(torch::relu(feat_mlp1_->forward(x)));
    return x;  // [B,M,feat_dim]
}

torch::Tensor SlotEncoderImpl::attention_step(const torch::Tensor& slots,
                                              const torch::Tensor& features,
                                              torch::Tensor* attn_out) {
    torch::Tensor q = to_q_->forward(norm_slots_->forward(slots));  // [B,N,D]
    torch::Tensor k = to_k_->forward(features);                     // [B,M,D]
    torch::Tensor v = to_v_->forward(features);
    const double scale = std::sqrt(static_cast<double>(cfg_.slot_dim));
    torch::Tensor logits = torch::matmul(q, k.transpose(1, 2)) / scale;  // [B,N,M]
    // Slots compete for cells: softmax over the slot axis, then each slot takes
    // the mass-normalized mean of the cells it won.
    torch::Tensor attn = torch::softmax(logits, /*dim=*/1);
    if (attn_out) *attn_out = attn;
    torch::Tensor weights = attn / (attn.sum(/*dim=*/2, /*keepdim=*/true) + cfg_.epsilon);
    torch::Tensor updates = torch::matmul(weights, v);  // [B,N,D]

    const auto b = slots.size(0), n = slots.size(1), d = slots.size(2);
    torch::Tensor next = gru_->forward(updates.reshape({b * n, d}), slots.reshape({b * n, d}))
                             .reshape({b, n, d});
    next = next + slot_mlp2_->forward(torch::relu(slot_mlp1_->forward(norm_pre_mlp_->forward(next))));
    return next;
}

torch::Tensor SlotEncoderImpl::initial_slots(int64_t batch) const {
    return slot_queries_.unsqueeze(0).expand({batch, cfg_.num_slots, cfg_.slot_dim});
}

torch::Tensor SlotEncoderImpl::encode_video_batch(const torch::Tensor& frames) {
    if (frames.dim() != 5 || frames.size(4) != 3) {
        throw std::invalid_argument("encoder: expected frames [B,T,H,W,3]");
    }
    const auto b = frames.size(0), t = frames.size(1);
    // All frames go through the conv stack in one batch; the slot loop stays sequential.
    torch::Tensor feats = encode_features_batch(frames.reshape({b * t, frames.size(2),
                                                                frames.size(3), 3}))
                              .reshape({b, t, -1, cfg_.feat_dim});
    torch::Tensor slots = initial_slots(b);
    std::vector<torch::Tensor> out;
    out.reserve(static_cast<size_t>(t));
    for (int64_t i = 0; i < t; ++i) {
        const int64_t iters = i == 0 ? cfg_.iters_first : cfg_.iters_later;
        torch::Tensor f = feats.select(1, i);
        for (int64_t it = 0; it < iters; ++it) slots = attention_step(slots, f);
        out.push_back(slots);
    }
    return torch::stack(out, 1);  // [B,T,N,D]
}

std::tuple<torch::Tensor, torch::Tensor, torch::Tensor> SlotEncoderImpl::decode_batch(
    const torch::Tensor& slots) {
    if (slots.dim() != 3) throw std::invalid_argument("encoder: expected slots [B,N,D]");
    const auto b = slots.size(0), n = slots.size(1);
    const int64_t g = cfg_.dec_grid, s = cfg_.image_size;
    // Spatial broadcast: every grid position sees the slot vector plus a position code.
    torch::Tensor x = slots.reshape({b * n, 1, cfg_.slot_dim}) +
                      dec_pos_embed_->forward(dec_coord_grid_);  // [B*N,G*G,D]
    x = torch::relu(dec_fc1_->forward(x));
    x = torch::relu(dec_fc2_->forward(x));
    x = dec_fc3_->forward(x);  // [B*N,G*G,4]
    x = x.reshape({b * n, g, g, 4}).permute({0, 3, 1, 2});  // [B*N,4,G,G]
    if (g != s) {
        x = torch::nn::functional::interpolate(
            x, torch::nn::functional::InterpolateFuncOptions()
                   .size(std::vector<int64_t>{s, s})
                   .mode(torch::kBilinear)
                   .align_corners(false));
    }
    x = x.reshape({b, n, 4, s, s});
    torch::Tensor rgb = torch::sigmoid(x.slice(2, 0, 3)).permute({0, 1, 3, 4, 2});  // [B,N,s,s,3]
    torch::Tensor alphas = torch::softmax(x.select(2, 3), /*dim=*/1);               // [B,N,s,s]
    torch::Tensor combined = (alphas.unsqueeze(-1) * rgb).sum(1);                   // [B,s,s,3]
    return {alphas, rgb, combined};
}

FeatureGrid SlotEncoderImpl::encode_features(const torch::Tensor& frame) {
    if (frame.dim() != 3) throw std::invalid_argument("encoder: expected frame [H,W,3]");
    const int64_t side = cfg_.grid_side();
    return FeatureGrid{encode_features_batch(frame.unsqueeze(0)).squeeze(0), {side, side}};
}

SlotSet SlotEncoderImpl::slot_attention_step(const SlotSet& slots, const FeatureGrid& grid) {
    torch::Tensor next =
        attention_step(slots.slots.unsqueeze(0), grid.features.unsqueeze(0)).squeeze(0);
    return SlotSet{next, slots.timestep};
}

std::vector<SlotSet> SlotEncoderImpl::encode_video(const torch::Tensor& frames) {
    if (frames.dim() != 4) throw std::invalid_argument("encoder: expected frames [T,H,W,3]");
    torch::Tensor all = encode_video_batch(frames.unsqueeze(0)).squeeze(0);  // [T,N,D]
    std::vector<SlotSet> out;
    out.reserve(static_cast<size_t>(all.size(0)));
    for (int64_t t = 0; t < all.size(0); ++t) out.push_back(SlotSet{all[t], t});
    return out;
}

std::pair<MaskSet, torch::Tensor> SlotEncoderImpl::decode_slots(const SlotSet& slots) {
    auto [alphas, rgb, combined] = decode_batch(slots.slots.unsqueeze(0));
    return {MaskSet{alphas.squeeze(0), rgb.squeeze(0)}, combined.squeeze(0)};
}

}  // namespace ock
