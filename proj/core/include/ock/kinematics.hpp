#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <optional>

namespace ock {

// Per-object motion state. Leading dims are free (batched or not); the last two
// are [N, 2] in normalized image coordinates.
struct KinState {
    torch::Tensor pos;  // [..., N, 2]
    torch::Tensor vel;  // [..., N, 2], units per frame
    torch::Tensor acc;  // [..., N, 2], units per frame^2
    int64_t timestep = 0;
};

// Soft-argmax of per-slot masks: mass-weighted mean of pixel-center coordinates.
// alphas: [..., N, H, W] nonnegative. Slots with total mass below `epsilon` get
// position (0.5, 0.5); if empty_flags is non-null it receives a bool [..., N].
torch::Tensor object_positions(const torch::Tensor& alphas, double epsilon = 1e-8,
                               torch::Tensor* empty_flags = nullptr);

// vel = lambda * (pos - prev.pos), acc = vel - prev.vel; zeros when prev is absent.
KinState kin_state(const torch::Tensor& pos, const std::optional<KinState>& prev,
                   const torch::Tensor& lambda, int64_t timestep);

// Constant-velocity extrapolation: pos' = pos + vel*delta, vel' = lambda*(pos'-pos),
// acc' = vel' - vel. Extrapolated positions are clamped to [0,1] unless clamp=false.
KinState analytical_step(const KinState& k, const torch::Tensor& lambda, double delta,
                         bool clamp = true);

// Owns the learnable scale lambda and the shared per-object embedding MLP.
class KinematicsImpl : public torch::nn::Module {
  public:
    KinematicsImpl(int64_t embed_dim, int64_t hidden = 64, double delta = 1.0,
                   double lambda_init = 1.0);

    torch::Tensor lambda() const { return lambda_; }
    double delta() const { return delta_; }
    int64_t embed_dim() const { return embed_dim_; }
    int64_t hidden() const { return fc1_->weight.size(0); }

    KinState state_from(const torch::Tensor& pos, const std::optional<KinState>& prev,
                        int64_t timestep) const;
    KinState extrapolate(const KinState& k) const;

    // (pos, vel, acc) concatenated per object -> MLP -> [..., N, embed_dim].
    torch::Tensor embed(const KinState& state);
    // Current and anticipated states stacked along the object-token axis: [..., 2N, embed_dim].
    torch::Tensor embed_pair(const KinState& current, const KinState& anticipated);

  private:
    int64_t embed_dim_;
    double delta_;
    torch::Tensor lambda_;
    torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};

TORCH_MODULE(Kinematics);

}  // namespace ock
