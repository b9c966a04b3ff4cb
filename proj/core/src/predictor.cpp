#include "ock/predictor.hpp"

#include <cmath>
#include <stdexcept>

namespace ock {

PredictorMode predictor_mode_from(const std::string& s) {
    if (s == "joint") return PredictorMode::joint;
    if (s == "cross") return PredictorMode::cross;
    if (s == "baseline") return PredictorMode::baseline;
    throw std::invalid_argument("predictor: unknown mode '" + s + "'");
}

KinMode kin_mode_from(const std::string& s) {
    if (s == "analytical") return KinMode::analytical;
    if (s == "empirical") return KinMode::empirical;
    throw std::invalid_argument("predictor: unknown kinematics mode '" + s + "'");
}

PeMode pe_mode_from(const std::string& s) {
    if (s == "temporal") return PeMode::temporal;
    if (s == "vanilla") return PeMode::vanilla;
    throw std::invalid_argument("predictor: unknown positional-encoding mode '" + s + "'");
}

std::string to_string(PredictorMode m) {
    switch (m) {
        case PredictorMode::joint: return "joint";
        case PredictorMode::cross: return "cross";
        case PredictorMode::baseline: return "baseline";
    }
    throw std::logic_error("unhandled predictor mode");
}

std::string to_string(KinMode m) {
    return m == KinMode::analytical ? "analytical" : "empirical";
}

std::string to_string(PeMode m) { return m == PeMode::temporal ? "temporal" : "vanilla"; }

void PredictorConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("predictor: layers must be >= 1");
    if (heads < 1) throw std::invalid_argument("predictor: heads must be >= 1");
    if (d_model < 1 || d_model % heads != 0) {
        throw std::invalid_argument("predictor: d_model must be a positive multiple of heads");
    }
    // Two frames define a velocity; acceleration is fully determined from the third.
    if (history_T < 2) throw std::invalid_argument("predictor: history_T must be >= 2");
    if (horizon_H < 0) throw std::invalid_argument("predictor: horizon_H must be >= 0");
    if (slot_dim < 1 || kin_dim < 1) {
        throw std::invalid_argument("predictor: token dims must be positive");
    }
    if (mode != PredictorMode::baseline && kin_dim != slot_dim) {
        throw std::invalid_argument(
            "predictor: kin_dim must equal slot_dim (both populations share one projection)");
    }
    if (tau_init < 0) throw std::invalid_argument("predictor: tau_init must be >= 0");
}

int64_t PredictorConfig::kin_tokens_per_object() const {
    if (mode == PredictorMode::baseline) return 0;
    return kin_mode == KinMode::analytical ? 2 : 1;
}

torch::Tensor positional_encoding(int64_t T, int64_t P, int64_t d_model, PeMode mode) {
    if (T < 1 || P < 1) throw std::invalid_argument("predictor: T and P must be >= 1");
    const int64_t L = T * P;
    torch::Tensor pos;
    if (mode == PeMode::temporal) {
        // All P tokens of a timestep share that timestep's phase.
        pos = torch::arange(T, torch::kFloat32).repeat_interleave(P);
    } else {
        pos = torch::arange(L, torch::kFloat32);
    }
    torch::Tensor i2 = torch::arange(0, d_model, 2, torch::kFloat32);
    torch::Tensor inv_freq = torch::exp(-i2 * (std::log(10000.0) / d_model));
    torch::Tensor angles = pos.unsqueeze(1) * inv_freq.unsqueeze(0);  // [L, ceil(d/2)]
    torch::Tensor pe = torch::zeros({L, d_model});
    pe.index_put_({torch::indexing::Slice(), torch::indexing::Slice(0, torch::indexing::None, 2)},
                  torch::sin(angles));
    pe.index_put_({torch::indexing::Slice(), torch::indexing::Slice(1, torch::indexing::None, 2)},
                  torch::cos(angles).slice(1, 0, d_model / 2));
    return pe;
}

std::pair<torch::Tensor, torch::Tensor> scaled_dot_attention(
    const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v,
    const torch::Tensor& scale, const std::optional<torch::Tensor>& mask) {
    if ((scale <= 0).any().item<bool>()) {
        throw std::runtime_error("attention: temperature must be positive");
    }
    torch::Tensor logits = torch::matmul(q, k.transpose(-2, -1)) / scale;
    if (mask) {
        logits = logits.masked_fill(*mask, -std::numeric_limits<float>::infinity());
    }
    torch::Tensor probs = torch::softmax(logits, /*dim=*/-1);
    return {torch::matmul(probs, v), probs};
}

namespace {

// [B, L, D] -> [B, heads, L, D/heads]
torch::Tensor split_heads(const torch::Tensor& x, int64_t heads) {
    const auto b = x.size(0), l = x.size(1), d = x.size(2);
    return x.reshape({b, l, heads, d / heads}).permute({0, 2, 1, 3});
}

torch::Tensor merge_heads(const torch::Tensor& x) {
    const auto b = x.size(0), h = x.size(1), l = x.size(2), dh = x.size(3);
    return x.permute({0, 2, 1, 3}).reshape({b, l, h * dh});
}

}  // namespace

JointLayerImpl::JointLayerImpl(int64_t d_model, int64_t heads) : heads_(heads) {
    ln1_ = register_module("ln1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d_model})));
    ln2_ = register_module("ln2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d_model})));
    wq_ = register_module("wq", torch::nn::Linear(d_model, d_model));
    wk_ = register_module("wk", torch::nn::Linear(d_model, d_model));
    wv_ = register_module("wv", torch::nn::Linear(d_model, d_model));
    wo_ = register_module("wo", torch::nn::Linear(d_model, d_model));
    ff1_ = register_module("ff1", torch::nn::Linear(d_model, 4 * d_model));
    ff2_ = register_module("ff2", torch::nn::Linear(4 * d_model, d_model));
}

torch::Tensor JointLayerImpl::forward(const torch::Tensor& x,
                                      const std::optional<torch::Tensor>& mask,
                                      torch::Tensor* attn) {
    torch::Tensor h = ln1_->forward(x);
    torch::Tensor q = split_heads(wq_->forward(h), heads_);
    torch::Tensor k = split_heads(wk_->forward(h), heads_);
    torch::Tensor v = split_heads(wv_->forward(h), heads_);
    torch::Tensor scale = torch::tensor(std::sqrt(static_cast<double>(q.size(-1))), q.options());
    auto [out, probs] = scaled_dot_attention(q, k, v, scale, mask);
    if (attn) *attn = probs;
    torch::Tensor y = x + wo_->forward(merge_heads(out));
    return y + ff2_->forward(torch::gelu(ff1_->forward(ln2_->forward(y))));
}

CrossLayerImpl::CrossLayerImpl(int64_t d_model, int64_t heads, double tau_init) : heads_(heads) {
    tau_ = register_parameter("tau", torch::tensor(tau_init, torch::kFloat32));
    ln_self_ = register_module("ln_self",
                               torch::nn::LayerNorm(torch::nn::LayerNormOptions({d_model})));
    ln_q_ = register_module("ln_q", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d_model})));
    ln_kv_ = register_module("ln_kv", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d_model})));
    ln_ff_ = register_module("ln_ff", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d_model})));
    sq_ = register_module("sq", torch::nn::Linear(d_model, d_model));
    sk_ = register_module("sk", torch::nn::Linear(d_model, d_model));
    sv_ = register_module("sv", torch::nn::Linear(d_model, d_model));
    so_ = register_module("so", torch::nn::Linear(d_model, d_model));
    cq_ = register_module("cq", torch::nn::Linear(d_model, d_model));
    ck_ = register_module("ck", torch::nn::Linear(d_model, d_model));
    cv_ = register_module("cv", torch::nn::Linear(d_model, d_model));
    co_ = register_module("co", torch::nn::Linear(d_model, d_model));
    ff1_ = register_module("ff1", torch::nn::Linear(d_model, 4 * d_model));
    ff2_ = register_module("ff2", torch::nn::Linear(4 * d_model, d_model));
}

torch::Tensor CrossLayerImpl::forward(const torch::Tensor& slots, const torch::Tensor& kins,
                                      torch::Tensor* self_attn, torch::Tensor* cross_attn) {
    // Self-attention over the slot-token history keeps temporal mixing.
    torch::Tensor h = ln_self_->forward(slots);
    torch::Tensor q = split_heads(sq_->forward(h), heads_);
    torch::Tensor k = split_heads(sk_->forward(h), heads_);
    torch::Tensor v = split_heads(sv_->forward(h), heads_);
    torch::Tensor scale = torch::tensor(std::sqrt(static_cast<double>(q.size(-1))), q.options());
    auto [self_out, self_probs] = scaled_dot_attention(q, k, v, scale);
    if (self_attn) *self_attn = self_probs;
    torch::Tensor x = slots + so_->forward(merge_heads(self_out));

    // Slots query the kinematics tokens; the learnable temperature replaces sqrt(d_k).
    torch::Tensor cq = split_heads(cq_->forward(ln_q_->forward(x)), heads_);
    torch::Tensor kn = ln_kv_->forward(kins);
    torch::Tensor ck = split_heads(ck_->forward(kn), heads_);
    torch::Tensor cv = split_heads(cv_->forward(kn), heads_);
    auto [cross_out, cross_probs] = scaled_dot_attention(cq, ck, cv, tau_.to(cq.dtype()));
    if (cross_attn) *cross_attn = cross_probs;
    x = x + co_->forward(merge_heads(cross_out));

    return x + ff2_->forward(torch::gelu(ff1_->forward(ln_ff_->forward(x))));
}

PredictorImpl::PredictorImpl(PredictorConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.tau_init == 0.0) cfg_.tau_init = std::sqrt(static_cast<double>(cfg_.d_model));
    in_proj_ = register_module("in_proj", torch::nn::Linear(cfg_.slot_dim, cfg_.d_model));
    if (cfg_.mode == PredictorMode::cross) {
        cross_layers_ = register_module("cross_layers", torch::nn::ModuleList());
        for (int64_t i = 0; i < cfg_.layers; ++i) {
            cross_layers_->push_back(CrossLayer(cfg_.d_model, cfg_.heads, cfg_.tau_init));
        }
    } else {
        joint_layers_ = register_module("joint_layers", torch::nn::ModuleList());
        for (int64_t i = 0; i < cfg_.layers; ++i) {
            joint_layers_->push_back(JointLayer(cfg_.d_model, cfg_.heads));
        }
    }
    out_norm_ = register_module("out_norm",
                                torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg_.d_model})));
    head_ = register_module("head", torch::nn::Linear(cfg_.d_model, cfg_.slot_dim));
}

torch::Tensor PredictorImpl::predict_next(const torch::Tensor& slot_history,
                                          const std::optional<torch::Tensor>& kin_tokens,
                                          AttnTrace* trace, bool mask_kinematics) {
    if (slot_history.dim() != 4) {
        throw std::invalid_argument("predictor: expected slot history [B,T,N,D]");
    }
    const auto b = slot_history.size(0), t = slot_history.size(1), n = slot_history.size(2);
    if (t < 2) throw std::invalid_argument("predictor: history shorter than 2 frames");

    const bool use_kins = kin_tokens.has_value() && cfg_.mode != PredictorMode::baseline;
    if (cfg_.mode == PredictorMode::cross && !use_kins) {
        throw std::invalid_argument("predictor: cross mode requires kinematics tokens");
    }
    int64_t kpt = 0;
    if (use_kins) {
        if (kin_tokens->dim() != 4 || kin_tokens->size(0) != b || kin_tokens->size(1) != t) {
            throw std::invalid_argument("predictor: kinematics tokens misaligned with history");
        }
        kpt = kin_tokens->size(2);
    }

    torch::Tensor slot_tok = in_proj_->forward(slot_history);  // [B,T,N,dm]
    torch::Tensor out;
    if (cfg_.mode == PredictorMode::cross) {
        torch::Tensor kin_tok = in_proj_->forward(*kin_tokens);  // [B,T,K,dm]
        torch::Tensor s = slot_tok.reshape({b, t * n, cfg_.d_model});
        torch::Tensor kf = kin_tok.reshape({b, t * kpt, cfg_.d_model});
        s = s + positional_encoding(t, n, cfg_.d_model, cfg_.pe_mode).to(s.options()).unsqueeze(0);
        kf = kf +
             positional_encoding(t, kpt, cfg_.d_model, cfg_.pe_mode).to(kf.options()).unsqueeze(0);
        for (size_t i = 0; i < cross_layers_->size(); ++i) {
            torch::Tensor sa, ca;
            s = cross_layers_[i]->as<CrossLayerImpl>()->forward(s, kf, trace ? &sa : nullptr,
                                                                trace ? &ca : nullptr);
            if (trace) {
                trace->self_attn.push_back(sa);
                trace->cross_attn.push_back(ca);
            }
        }
        out = s.reshape({b, t, n, cfg_.d_model}).select(1, t - 1);
    } else {
        const int64_t p = n + (use_kins ? kpt : 0);
        torch::Tensor seq;
        if (use_kins) {
            torch::Tensor kin_tok = in_proj_->forward(*kin_tokens);
            seq = torch::cat({slot_tok, kin_tok}, /*dim=*/2).reshape({b, t * p, cfg_.d_model});
        } else {
            seq = slot_tok.reshape({b, t * p, cfg_.d_model});
        }
        seq = seq +
              positional_encoding(t, p, cfg_.d_model, cfg_.pe_mode).to(seq.options()).unsqueeze(0);
        std::optional<torch::Tensor> mask;
        if (use_kins && mask_kinematics) {
            // Hide every kinematics token from every query; with the same weights the
            // slot-token path then computes exactly what the baseline layout computes.
            torch::Tensor is_kin = torch::zeros({t * p}, torch::kBool);
            for (int64_t ti = 0; ti < t; ++ti) {
                is_kin.slice(0, ti * p + n, (ti + 1) * p).fill_(true);
            }
            mask = is_kin.reshape({1, 1, 1, t * p}).expand({1, 1, t * p, t * p});
        }
        for (size_t i = 0; i < joint_layers_->size(); ++i) {
            torch::Tensor a;
            seq = joint_layers_[i]->as<JointLayerImpl>()->forward(seq, mask, trace ? &a : nullptr);
            if (trace) trace->self_attn.push_back(a);
        }
        out = seq.reshape({b, t, p, cfg_.d_model}).select(1, t - 1).slice(1, 0, n);
    }
    return head_->forward(out_norm_->forward(out));  // [B,N,slot_dim]
}

}  // namespace ock
