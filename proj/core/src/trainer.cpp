#include "ock/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ock {

namespace {

void ensure_single_thread() {
    // Reproducibility is promised for single-threaded execution only.
    static std::once_flag flag;
    std::call_once(flag, [] { torch::set_num_threads(1); });
}

void set_lr(torch::optim::Adam& opt, double lr) {
    for (auto& group : opt.param_groups()) {
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
}

double cosine_lr(double base, int64_t step, int64_t total) {
    const double t = static_cast<double>(step) / static_cast<double>(std::max<int64_t>(1, total));
    return base * 0.5 * (1.0 + std::cos(M_PI * t));
}

double ms_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

void TrainConfig::validate() const {
    if (alpha < 0) throw std::invalid_argument("trainer: alpha must be >= 0");
    if (lr <= 0) throw std::invalid_argument("trainer: lr must be positive");
    if (steps < 1) throw std::invalid_argument("trainer: steps must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("trainer: batch_size must be >= 1");
    if (grad_clip <= 0) throw std::invalid_argument("trainer: grad_clip must be positive");
    if (log_every < 1) throw std::invalid_argument("trainer: log_every must be >= 1");
}

torch::Tensor object_loss(const torch::Tensor& pred_slots, const torch::Tensor& gt_slots,
                          bool squared) {
    if (pred_slots.sizes() != gt_slots.sizes()) {
        throw std::invalid_argument("loss: slot tensors must have matching shapes");
    }
    torch::Tensor sq = (pred_slots - gt_slots).pow(2).sum(-1);  // [..., H, N]
    return (squared ? sq : torch::sqrt(sq)).mean();
}

torch::Tensor image_loss(const torch::Tensor& pred_slots, const torch::Tensor& gt_frames,
                         SlotEncoder& encoder, bool squared) {
    if (pred_slots.dim() != 4 || gt_frames.dim() != 5) {
        throw std::invalid_argument("loss: expected slots [B,H,N,D] and frames [B,H,h,w,3]");
    }
    const auto b = pred_slots.size(0), h = pred_slots.size(1);
    auto [alphas, rgb, combined] =
        encoder->decode_batch(pred_slots.reshape({b * h, pred_slots.size(2), pred_slots.size(3)}));
    torch::Tensor diff = combined - gt_frames.reshape({b * h, gt_frames.size(2),
                                                       gt_frames.size(3), 3});
    torch::Tensor sq = diff.flatten(1).pow(2).sum(1);  // one norm per predicted frame
    return (squared ? sq : torch::sqrt(sq)).mean();
}

LossParts total_loss(const torch::Tensor& pred_slots, const torch::Tensor& gt_slots,
                     const torch::Tensor& gt_frames, SlotEncoder& encoder, double alpha,
                     bool squared) {
    LossParts parts;
    parts.object = object_loss(pred_slots, gt_slots, squared);
    parts.image = alpha > 0 ? image_loss(pred_slots, gt_frames, encoder, squared)
                            : torch::zeros({}, pred_slots.options());
    parts.total = parts.object + alpha * parts.image;
    return parts;
}

std::optional<torch::Tensor> window_kin_tokens(Kinematics& kin, const PredictorConfig& cfg,
                                               const torch::Tensor& window_positions) {
    if (cfg.mode == PredictorMode::baseline) return std::nullopt;
    if (window_positions.dim() != 4 || window_positions.size(3) != 2) {
        throw std::invalid_argument("trainer: expected window positions [B,T,N,2]");
    }
    const auto t = window_positions.size(1);
    std::optional<KinState> prev;
    std::vector<torch::Tensor> tokens;
    tokens.reserve(static_cast<size_t>(t));
    for (int64_t i = 0; i < t; ++i) {
        KinState state = kin->state_from(window_positions.select(1, i), prev, i);
        if (cfg.kin_mode == KinMode::analytical) {
            tokens.push_back(kin->embed_pair(state, kin->extrapolate(state)));
        } else {
            tokens.push_back(kin->embed(state));
        }
        prev = state;
    }
    return torch::stack(tokens, 1);  // [B,T,K,Dk]
}

torch::Tensor unroll(Predictor& predictor, Kinematics& kin, SlotEncoder& encoder,
                     const torch::Tensor& slots_obs, const torch::Tensor& positions_obs,
                     int64_t T, int64_t H, bool teacher_forcing) {
    if (slots_obs.dim() != 4 || positions_obs.dim() != 4) {
        throw std::invalid_argument("trainer: expected observed slots [B,T,N,D] and positions");
    }
    if (T < 2) throw std::invalid_argument("trainer: burn-in must be >= 2 frames");
    const auto t_obs = slots_obs.size(1);
    if (t_obs < T || positions_obs.size(1) != t_obs) {
        throw std::invalid_argument("trainer: observed sequence shorter than burn-in");
    }
    if (teacher_forcing && t_obs < T + H) {
        throw std::invalid_argument("trainer: teacher forcing needs observations across the horizon");
    }

    std::vector<torch::Tensor> slot_seq, pos_seq;
    for (int64_t i = 0; i < T; ++i) {
        slot_seq.push_back(slots_obs.select(1, i));
        pos_seq.push_back(positions_obs.select(1, i));
    }
    std::vector<torch::Tensor> preds;
    preds.reserve(static_cast<size_t>(H));
    for (int64_t h = 0; h < H; ++h) {
        std::vector<torch::Tensor> ws(slot_seq.end() - T, slot_seq.end());
        std::vector<torch::Tensor> wp(pos_seq.end() - T, pos_seq.end());
        torch::Tensor window_slots = torch::stack(ws, 1);
        torch::Tensor window_pos = torch::stack(wp, 1);
        auto kin_tokens = window_kin_tokens(kin, predictor->config(), window_pos);
        torch::Tensor next = predictor->predict_next(window_slots, kin_tokens);
        preds.push_back(next);
        if (teacher_forcing) {
            slot_seq.push_back(slots_obs.select(1, T + h));
            pos_seq.push_back(positions_obs.select(1, T + h));
        } else {
            // Feeding a non-finite prediction onward would surface as a bad-argument
            // error from the kinematics; report it as the runtime failure it is.
            if (!next.isfinite().all().item<bool>()) {
                throw std::runtime_error("trainer: predicted slots went non-finite at step " +
                                         std::to_string(h));
            }
            slot_seq.push_back(next);
            auto [alphas, rgb, combined] = encoder->decode_batch(next);
            (void)rgb;
            (void)combined;
            pos_seq.push_back(object_positions(alphas));
        }
    }
    if (preds.empty()) {
        return torch::empty({slots_obs.size(0), 0, slots_obs.size(2), slots_obs.size(3)},
                            slots_obs.options());
    }
    return torch::stack(preds, 1);  // [B,H,N,D]
}

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("trainer: cannot write log " + path);
    out << "step,l_object,l_image,l_total,wall_ms\n";
    for (const auto& r : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%lld,%.8g,%.8g,%.8g,%.3f\n",
                      static_cast<long long>(r.step), r.l_object, r.l_image, r.l_total, r.wall_ms);
        out << buf;
    }
}

std::vector<TrainLogRow> read_train_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("trainer: cannot open log " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("trainer: empty log " + path);
    std::vector<TrainLogRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        TrainLogRow r;
        long long step = 0;
        if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf", &step, &r.l_object, &r.l_image,
                        &r.l_total, &r.wall_ms) != 5) {
            throw std::runtime_error("trainer: malformed log line in " + path + ": " + line);
        }
        r.step = step;
        rows.push_back(r);
    }
    return rows;
}

SlotEncoder train_encoder(const std::vector<VideoClip>& clips, const EncoderConfig& enc_cfg,
                          const TrainConfig& cfg, std::vector<TrainLogRow>* log) {
    ensure_single_thread();
    enc_cfg.validate();
    cfg.validate();
    if (clips.empty()) throw std::invalid_argument("trainer: corpus is empty");

    torch::manual_seed(static_cast<int64_t>(cfg.seed));
    SlotEncoder encoder(enc_cfg);
    encoder->train();
    auto params = encoder->parameters();
    torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg.lr));

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const int64_t clip_len = clips[0].num_frames();
    const int64_t window = std::min<int64_t>(6, clip_len);
    std::uniform_int_distribution<int64_t> pick_clip(0, static_cast<int64_t>(clips.size()) - 1);
    std::uniform_int_distribution<int64_t> pick_start(0, clip_len - window);

    const auto t0 = std::chrono::steady_clock::now();
    for (int64_t step = 0; step < cfg.steps; ++step) {
        set_lr(opt, cosine_lr(cfg.lr, step, cfg.steps));
        std::vector<torch::Tensor> batch;
        batch.reserve(static_cast<size_t>(cfg.batch_size));
        for (int64_t b = 0; b < cfg.batch_size; ++b) {
            const int64_t c = pick_clip(rng), s = pick_start(rng);
            batch.push_back(clips[static_cast<size_t>(c)].frames.slice(0, s, s + window));
        }
        torch::Tensor frames = torch::stack(batch, 0);  // [B,W,h,w,3]
        torch::Tensor slots = encoder->encode_video_batch(frames);
        const auto b = slots.size(0), w = slots.size(1);
        auto [alphas, rgb, combined] =
            encoder->decode_batch(slots.reshape({b * w, slots.size(2), slots.size(3)}));
        (void)alphas;
        (void)rgb;
        torch::Tensor loss = torch::mse_loss(
            combined, frames.reshape({b * w, frames.size(2), frames.size(3), 3}));
        if (!loss.isfinite().item<bool>()) {
            throw std::runtime_error("trainer: encoder loss diverged (non-finite) at step " +
                                     std::to_string(step));
        }
        if (log && (step % cfg.log_every == 0 || step == cfg.steps - 1)) {
            const double v = loss.item<double>();
            log->push_back({step, 0.0, v, v, ms_since(t0)});
        }
        opt.zero_grad();
        loss.backward();
        torch::nn::utils::clip_grad_norm_(params, cfg.grad_clip);
        opt.step();
    }
    encoder->eval();
    return encoder;
}

EncodedCorpus encode_corpus(SlotEncoder& encoder, const std::vector<VideoClip>& clips,
                            int64_t chunk) {
    if (clips.empty()) throw std::invalid_argument("trainer: corpus is empty");
    if (chunk < 1) throw std::invalid_argument("trainer: encode chunk must be >= 1");
    const bool was_training = encoder->is_training();
    encoder->eval();
    torch::NoGradGuard guard;
    std::vector<torch::Tensor> slots_chunks, pos_chunks;
    for (size_t i = 0; i < clips.size(); i += static_cast<size_t>(chunk)) {
        std::vector<torch::Tensor> frames;
        for (size_t j = i; j < std::min(clips.size(), i + static_cast<size_t>(chunk)); ++j) {
            frames.push_back(clips[j].frames);
        }
        torch::Tensor f = torch::stack(frames, 0);
        torch::Tensor s = encoder->encode_video_batch(f);  // [b,Tc,N,D]
        const auto b = s.size(0), tc = s.size(1);
        auto [alphas, rgb, combined] =
            encoder->decode_batch(s.reshape({b * tc, s.size(2), s.size(3)}));
        (void)rgb;
        (void)combined;
        torch::Tensor p = object_positions(alphas).reshape({b, tc, s.size(2), 2});
        slots_chunks.push_back(s);
        pos_chunks.push_back(p);
    }
    if (was_training) encoder->train();
    return {torch::cat(slots_chunks, 0), torch::cat(pos_chunks, 0)};
}

PredictorBundle train_predictor(const std::vector<VideoClip>& clips, SlotEncoder& encoder,
                                const PredictorConfig& pred_cfg, const TrainConfig& cfg,
                                std::vector<TrainLogRow>* log) {
    EncodedCorpus codes = encode_corpus(encoder, clips);
    return train_predictor(clips, codes, encoder, pred_cfg, cfg, log);
}

PredictorBundle train_predictor(const std::vector<VideoClip>& clips, const EncodedCorpus& codes,
                                SlotEncoder& encoder, const PredictorConfig& pred_cfg,
                                const TrainConfig& cfg, std::vector<TrainLogRow>* log) {
    ensure_single_thread();
    pred_cfg.validate();
    cfg.validate();
    if (clips.empty()) throw std::invalid_argument("trainer: corpus is empty");
    if (codes.slots.size(0) != static_cast<int64_t>(clips.size())) {
        throw std::invalid_argument("trainer: encoded corpus does not cover the clip list");
    }
    const int64_t T = pred_cfg.history_T, H = pred_cfg.horizon_H;
    const int64_t clip_len = clips[0].num_frames();
    if (clip_len < T + H) {
        throw std::invalid_argument("trainer: clips shorter than history_T + horizon_H");
    }

    torch::manual_seed(static_cast<int64_t>(cfg.seed));

    // The encoder-decoder is frozen for the whole stage.
    std::vector<bool> prior_grad;
    for (auto& p : encoder->parameters()) {
        prior_grad.push_back(p.requires_grad());
        p.set_requires_grad(false);
    }
    const bool was_training = encoder->is_training();
    encoder->eval();

    const torch::Tensor& slots_all = codes.slots;
    const torch::Tensor& pos_all = codes.positions;

    Predictor predictor(pred_cfg);
    Kinematics kin(pred_cfg.kin_dim, /*hidden=*/64, /*delta=*/1.0, /*lambda_init=*/1.0);
    predictor->train();
    kin->train();
    std::vector<torch::Tensor> params = predictor->parameters();
    for (auto& p : kin->parameters()) params.push_back(p);
    torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg.lr));

    std::mt19937_64 rng(cfg.seed ^ 0xd1b54a32d192ed03ull);
    std::uniform_int_distribution<int64_t> pick_clip(0, slots_all.size(0) - 1);
    std::uniform_int_distribution<int64_t> pick_start(0, clip_len - (T + H));

    const auto t0 = std::chrono::steady_clock::now();
    for (int64_t step = 0; step < cfg.steps; ++step) {
        set_lr(opt, cosine_lr(cfg.lr, step, cfg.steps));
        std::vector<torch::Tensor> bs, bp, bf;
        for (int64_t b = 0; b < cfg.batch_size; ++b) {
            const int64_t c = pick_clip(rng), s = pick_start(rng);
            bs.push_back(slots_all[c].slice(0, s, s + T + H));
            bp.push_back(pos_all[c].slice(0, s, s + T + H));
            bf.push_back(clips[static_cast<size_t>(c)].frames.slice(0, s + T, s + T + H));
        }
        torch::Tensor slots_obs = torch::stack(bs, 0);
        torch::Tensor pos_obs = torch::stack(bp, 0);
        torch::Tensor gt_frames = torch::stack(bf, 0);

        torch::Tensor pred =
            unroll(predictor, kin, encoder, slots_obs, pos_obs, T, H, cfg.teacher_forcing);
        LossParts parts = total_loss(pred, slots_obs.slice(1, T, T + H), gt_frames, encoder,
                                     cfg.alpha, cfg.squared_losses);
        if (!parts.total.isfinite().item<bool>()) {
            throw std::runtime_error("trainer: predictor loss diverged (non-finite) at step " +
                                     std::to_string(step));
        }
        if (log && (step % cfg.log_every == 0 || step == cfg.steps - 1)) {
            log->push_back({step, parts.object.item<double>(), parts.image.item<double>(),
                            parts.total.item<double>(), ms_since(t0)});
        }
        opt.zero_grad();
        parts.total.backward();
        torch::nn::utils::clip_grad_norm_(params, cfg.grad_clip);
        opt.step();
    }

    for (size_t i = 0; i < prior_grad.size(); ++i) {
        encoder->parameters()[i].set_requires_grad(prior_grad[i]);
    }
    if (was_training) encoder->train();
    predictor->eval();
    kin->eval();
    return PredictorBundle{predictor, kin};
}

}  // namespace ock
