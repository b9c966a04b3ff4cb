#include "ock/kinematics.hpp"

#include <stdexcept>

namespace ock {

torch::Tensor object_positions(const torch::Tensor& alphas, double epsilon,
                               torch::Tensor* empty_flags) {
    if (alphas.dim() < 3) {
        throw std::invalid_argument("kinematics: expected masks [..., N, H, W]");
    }
    const auto h = alphas.size(-2), w = alphas.size(-1);
    torch::Tensor flat = alphas.flatten(-2);  // [..., N, H*W]
    torch::Tensor xs = (torch::arange(w, alphas.options()) + 0.5) / static_cast<double>(w);
    torch::Tensor ys = (torch::arange(h, alphas.options()) + 0.5) / static_cast<double>(h);
    torch::Tensor coords = torch::stack({xs.repeat({h}),
                                         ys.repeat_interleave(w)}, /*dim=*/1);  // [H*W, 2]
    torch::Tensor mass = flat.sum(-1, /*keepdim=*/true);          // [..., N, 1]
    torch::Tensor empty = mass.squeeze(-1) < epsilon;             // [..., N]
    torch::Tensor mean = torch::matmul(flat, coords) / mass.clamp_min(epsilon);
    torch::Tensor pos = torch::where(empty.unsqueeze(-1), torch::full_like(mean, 0.5), mean);
    if (empty_flags) *empty_flags = empty;
    return pos;
}

KinState kin_state(const torch::Tensor& pos, const std::optional<KinState>& prev,
                   const torch::Tensor& lambda, int64_t timestep) {
    if (!pos.isfinite().all().item<bool>()) {
        throw std::invalid_argument("kinematics: non-finite positions");
    }
    if (!prev) {
        return KinState{pos, torch::zeros_like(pos), torch::zeros_like(pos), timestep};
    }
    torch::Tensor vel = lambda * (pos - prev->pos);
    torch::Tensor acc = vel - prev->vel;
    return KinState{pos, vel, acc, timestep};
}

KinState analytical_step(const KinState& k, const torch::Tensor& lambda, double delta,
                         bool clamp) {
    torch::Tensor pos = k.pos + k.vel * delta;
    if (clamp) pos = pos.clamp(0.0, 1.0);
    torch::Tensor vel = lambda * (pos - k.pos);
    torch::Tensor acc = vel - k.vel;
    return KinState{pos, vel, acc, k.timestep + 1};
}

KinematicsImpl::KinematicsImpl(int64_t embed_dim, int64_t hidden, double delta,
                               double lambda_init)
    : embed_dim_(embed_dim), delta_(delta) {
    if (embed_dim < 1 || hidden < 1) {
        throw std::invalid_argument("kinematics: dimensions must be positive");
    }
    if (delta <= 0) throw std::invalid_argument("kinematics: delta must be positive");
    lambda_ = register_parameter("lambda", torch::tensor(lambda_init, torch::kFloat32));
    fc1_ = register_module("fc1", torch::nn::Linear(6, hidden));
    fc2_ = register_module("fc2", torch::nn::Linear(hidden, embed_dim));
}

KinState KinematicsImpl::state_from(const torch::Tensor& pos, const std::optional<KinState>& prev,
                                    int64_t timestep) const {
    return kin_state(pos, prev, lambda_, timestep);
}

KinState KinematicsImpl::extrapolate(const KinState& k) const {
    return analytical_step(k, lambda_, delta_);
}

torch::Tensor KinematicsImpl::embed(const KinState& state) {
    if (state.pos.size(-1) != 2 || state.vel.sizes() != state.pos.sizes() ||
        state.acc.sizes() != state.pos.sizes()) {
        throw std::invalid_argument("kinematics: state tensors must agree on [..., N, 2]");
    }
    torch::Tensor x = torch::cat({state.pos, state.vel, state.acc}, /*dim=*/-1);  // [..., N, 6]
    return fc2_->forward(torch::relu(fc1_->forward(x)));
}

torch::Tensor KinematicsImpl::embed_pair(const KinState& current, const KinState& anticipated) {
    return torch::cat({embed(current), embed(anticipated)}, /*dim=*/-2);  // [..., 2N, D]
}

}  // namespace ock
