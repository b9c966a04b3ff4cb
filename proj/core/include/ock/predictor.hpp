#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ock {

enum class PredictorMode { joint, cross, baseline };
enum class KinMode { analytical, empirical };
enum class PeMode { temporal, vanilla };

PredictorMode predictor_mode_from(const std::string& s);
KinMode kin_mode_from(const std::string& s);
PeMode pe_mode_from(const std::string& s);
std::string to_string(PredictorMode m);
std::string to_string(KinMode m);
std::string to_string(PeMode m);

struct PredictorConfig {
    PredictorMode mode = PredictorMode::joint;
    KinMode kin_mode = KinMode::analytical;
    PeMode pe_mode = PeMode::temporal;
    int64_t layers = 4;
    int64_t heads = 4;
    int64_t d_model = 64;
    int64_t history_T = 6;
    int64_t horizon_H = 8;
    int64_t slot_dim = 64;
    int64_t kin_dim = 64;
    double tau_init = 0.0;  // 0 means sqrt(d_model)

    void validate() const;
    int64_t kin_tokens_per_object() const;  // 2 analytical, 1 empirical, 0 baseline
};

// Sinusoidal positional encodings for T timesteps with P tokens each, [T*P, d_model].
// temporal: every token of a timestep shares that timestep's encoding.
// vanilla: each token is encoded by its flat index, which breaks slot-order symmetry.
torch::Tensor positional_encoding(int64_t T, int64_t P, int64_t d_model, PeMode mode);

// probs = softmax(q·kᵀ / scale) over the last axis, out = probs·v.
// q [..., Lq, D], k/v [..., Lk, D]; scale is a positive scalar tensor so a learnable
// temperature keeps its gradient. mask, if defined, is [Lq, Lk] with true = blocked.
std::pair<torch::Tensor, torch::Tensor> scaled_dot_attention(
    const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v,
    const torch::Tensor& scale, const std::optional<torch::Tensor>& mask = std::nullopt);

// Captured attention distributions, one entry per layer: [B, heads, Lq, Lk].
struct AttnTrace {
    std::vector<torch::Tensor> self_attn;
    std::vector<torch::Tensor> cross_attn;
};

// Pre-norm self-attention + feed-forward block over the whole token sequence.
class JointLayerImpl : public torch::nn::Module {
  public:
    JointLayerImpl(int64_t d_model, int64_t heads);
    torch::Tensor forward(const torch::Tensor& x, const std::optional<torch::Tensor>& mask,
                          torch::Tensor* attn = nullptr);

  private:
    int64_t heads_;
    torch::nn::LayerNorm ln1_{nullptr}, ln2_{nullptr};
    torch::nn::Linear wq_{nullptr}, wk_{nullptr}, wv_{nullptr}, wo_{nullptr};
    torch::nn::Linear ff1_{nullptr}, ff2_{nullptr};
};

TORCH_MODULE(JointLayer);

// Slot self-attention, then cross-attention from slots to kinematics tokens with
// logits divided by a learnable temperature tau, then feed-forward.
class CrossLayerImpl : public torch::nn::Module {
  public:
    CrossLayerImpl(int64_t d_model, int64_t heads, double tau_init);
    torch::Tensor forward(const torch::Tensor& slots, const torch::Tensor& kins,
                          torch::Tensor* self_attn = nullptr, torch::Tensor* cross_attn = nullptr);
    torch::Tensor tau() const { return tau_; }

  private:
    int64_t heads_;
    torch::Tensor tau_;
    torch::nn::LayerNorm ln_self_{nullptr}, ln_q_{nullptr}, ln_kv_{nullptr}, ln_ff_{nullptr};
    torch::nn::Linear sq_{nullptr}, sk_{nullptr}, sv_{nullptr}, so_{nullptr};
    torch::nn::Linear cq_{nullptr}, ck_{nullptr}, cv_{nullptr}, co_{nullptr};
    torch::nn::Linear ff1_{nullptr}, ff2_{nullptr};
};

TORCH_MODULE(CrossLayer);

class PredictorImpl : public torch::nn::Module {
  public:
    explicit PredictorImpl(PredictorConfig cfg);

    const PredictorConfig& config() const { return cfg_; }

    // slot_history: [B, T, N, slot_dim], T >= 2.
    // kin_tokens: [B, T, K, kin_dim] with K = kin_tokens_per_step(); pass nullopt in
    // baseline mode. In joint/cross mode nullopt drops the kinematics pathway, which
    // the tests use to check that a masked joint pass collapses to the baseline.
    // Returns next-step slots [B, N, slot_dim].
    torch::Tensor predict_next(const torch::Tensor& slot_history,
                               const std::optional<torch::Tensor>& kin_tokens,
                               AttnTrace* trace = nullptr, bool mask_kinematics = false);

  private:
    PredictorConfig cfg_;
    torch::nn::Linear in_proj_{nullptr};   // shared slot/kinematics projection to d_model
    torch::nn::ModuleList joint_layers_{nullptr};
    torch::nn::ModuleList cross_layers_{nullptr};
    torch::nn::LayerNorm out_norm_{nullptr};
    torch::nn::Linear head_{nullptr};
};

TORCH_MODULE(Predictor);

}  // namespace ock
