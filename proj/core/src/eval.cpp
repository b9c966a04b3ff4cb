#include "ock/eval.hpp"

#include <cmath>
#include <stdexcept>

#include "ock/metrics.hpp"
#include "ock/trainer.hpp"

namespace ock {

EvalMethod eval_method_from(const std::string& s) {
    if (s == "model") return EvalMethod::model;
    if (s == "copy_last_slot") return EvalMethod::copy_last_slot;
    if (s == "copy_last_frame") return EvalMethod::copy_last_frame;
    throw std::invalid_argument("evaluate: unknown method '" + s + "'");
}

std::string to_string(EvalMethod m) {
    switch (m) {
        case EvalMethod::model: return "model";
        case EvalMethod::copy_last_slot: return "copy_last_slot";
        case EvalMethod::copy_last_frame: return "copy_last_frame";
    }
    throw std::logic_error("unhandled eval method");
}

nlohmann::json EvalReport::to_json() const {
    return {{"method", method},
            {"burn_in", burn_in},
            {"horizon", horizon},
            {"clips", clips},
            {"psnr_per_frame", psnr_per_frame},
            {"ssim_per_frame", ssim_per_frame},
            {"slot_error_per_frame", slot_error_per_frame},
            {"mean_psnr", mean_psnr},
            {"mean_ssim", mean_ssim},
            {"fg_ari", fg_ari},
            {"miou", miou},
            {"slot_error", slot_error}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport r;
    r.method = j.at("method").get<std::string>();
    r.burn_in = j.at("burn_in").get<int64_t>();
    r.horizon = j.at("horizon").get<int64_t>();
    r.clips = j.at("clips").get<int64_t>();
    r.psnr_per_frame = j.at("psnr_per_frame").get<std::vector<double>>();
    r.ssim_per_frame = j.at("ssim_per_frame").get<std::vector<double>>();
    r.slot_error_per_frame = j.at("slot_error_per_frame").get<std::vector<double>>();
    r.mean_psnr = j.at("mean_psnr").get<double>();
    r.mean_ssim = j.at("mean_ssim").get<double>();
    r.fg_ari = j.at("fg_ari").get<double>();
    r.miou = j.at("miou").get<double>();
    r.slot_error = j.at("slot_error").get<double>();
    return r;
}

RolloutResult rollout(const torch::Tensor& initial_frames, int64_t H, SlotEncoder& encoder,
                      Kinematics& kin, Predictor& predictor) {
    if (initial_frames.dim() != 4 || initial_frames.size(3) != 3) {
        throw std::invalid_argument("rollout: expected burn-in frames [T,h,w,3]");
    }
    const int64_t T = initial_frames.size(0);
    if (T < 2) throw std::invalid_argument("rollout: need at least 2 burn-in frames");
    if (H < 0) throw std::invalid_argument("rollout: horizon must be >= 0");

    torch::NoGradGuard guard;
    torch::Tensor slots_obs = encoder->encode_video_batch(initial_frames.unsqueeze(0));  // [1,T,N,D]
    const auto n = slots_obs.size(2), d = slots_obs.size(3);
    auto [alphas0, rgb0, comb0] = encoder->decode_batch(slots_obs.reshape({T, n, d}));
    (void)rgb0;
    (void)comb0;
    torch::Tensor pos_obs = object_positions(alphas0).reshape({1, T, n, 2});

    std::vector<torch::Tensor> slot_seq, pos_seq;
    for (int64_t t = 0; t < T; ++t) {
        slot_seq.push_back(slots_obs.select(1, t));
        pos_seq.push_back(pos_obs.select(1, t));
    }

    const int64_t s = encoder->config().image_size;
    RolloutResult res;
    std::vector<torch::Tensor> out_slots, out_frames, out_alphas;
    for (int64_t h = 0; h < H; ++h) {
        std::vector<torch::Tensor> ws(slot_seq.end() - T, slot_seq.end());
        std::vector<torch::Tensor> wp(pos_seq.end() - T, pos_seq.end());
        auto kin_tokens = window_kin_tokens(kin, predictor->config(), torch::stack(wp, 1));
        torch::Tensor next = predictor->predict_next(torch::stack(ws, 1), kin_tokens);  // [1,N,D]
        if (!next.isfinite().all().item<bool>()) {
            throw std::runtime_error("rollout: non-finite slots at step " + std::to_string(h));
        }
        auto [alphas, rgb, combined] = encoder->decode_batch(next);
        (void)rgb;
        slot_seq.push_back(next);
        pos_seq.push_back(object_positions(alphas));
        out_slots.push_back(next.squeeze(0));
        out_frames.push_back(combined.squeeze(0));
        out_alphas.push_back(alphas.squeeze(0));
    }

    res.slots = out_slots.empty() ? torch::empty({0, n, d}) : torch::stack(out_slots, 0);
    res.frames = out_frames.empty() ? torch::empty({0, s, s, 3}) : torch::stack(out_frames, 0);
    res.alphas = out_alphas.empty() ? torch::empty({0, n, s, s}) : torch::stack(out_alphas, 0);
    std::vector<torch::Tensor> trace;
    trace.reserve(pos_seq.size());
    for (auto& p : pos_seq) trace.push_back(p.squeeze(0));
    res.positions = torch::stack(trace, 0);  // [T+H,N,2]
    return res;
}

torch::Tensor predicted_labels(const torch::Tensor& alphas) {
    if (alphas.dim() != 3 && alphas.dim() != 4) {
        throw std::invalid_argument("labels: expected [N,h,w] or [T,N,h,w] masks");
    }
    const int64_t slot_axis = alphas.dim() - 3;
    torch::Tensor arg = alphas.argmax(slot_axis);  // [..., h, w]

    // The slot that dominates the image border is the background; relabel it 0 so the
    // map reads like a ground-truth one. The remaining slots shift to 1..N-1.
    torch::Tensor mass = slot_axis == 0 ? alphas : alphas.sum(0);  // [N,h,w]
    const auto h = mass.size(1), w = mass.size(2);
    torch::Tensor ring = torch::zeros({h, w}, mass.options());
    ring.select(0, 0).fill_(1);
    ring.select(0, h - 1).fill_(1);
    ring.select(1, 0).fill_(1);
    ring.select(1, w - 1).fill_(1);
    const int64_t bg = (mass * ring.unsqueeze(0)).sum({1, 2}).argmax().item<int64_t>();

    const int64_t n = alphas.size(slot_axis);
    torch::Tensor remap = torch::zeros({n}, torch::kLong);
    int64_t next_id = 1;
    for (int64_t i = 0; i < n; ++i) {
        remap[i] = i == bg ? 0 : next_id++;
    }
    return remap.index({arg});
}

EvalReport evaluate_rollout(const std::vector<VideoClip>& clips, int64_t T, int64_t H,
                            SlotEncoder& encoder, Kinematics* kin, Predictor* predictor,
                            EvalMethod method) {
    if (clips.empty()) throw std::invalid_argument("evaluate: empty clip split");
    if (H < 1) throw std::invalid_argument("evaluate: horizon must be >= 1");
    if (method == EvalMethod::model && (!kin || !predictor)) {
        throw std::invalid_argument("evaluate: model method needs kinematics and predictor");
    }
    torch::NoGradGuard guard;

    EvalReport report;
    report.method = to_string(method);
    report.burn_in = T;
    report.horizon = H;
    report.clips = static_cast<int64_t>(clips.size());
    report.psnr_per_frame.assign(static_cast<size_t>(H), 0.0);
    report.ssim_per_frame.assign(static_cast<size_t>(H), 0.0);
    report.slot_error_per_frame.assign(static_cast<size_t>(H), 0.0);
    double ari_sum = 0, miou_sum = 0;

    for (const auto& clip : clips) {
        if (clip.num_frames() < T + H) {
            throw std::invalid_argument("evaluate: clip shorter than burn-in plus horizon");
        }
        torch::Tensor gt = clip.frames.slice(0, 0, T + H);
        torch::Tensor gt_slots_all = encoder->encode_video_batch(gt.unsqueeze(0)).squeeze(0);
        torch::Tensor gt_slots = gt_slots_all.slice(0, T, T + H);  // [H,N,D]

        torch::Tensor pred_slots, pred_frames, pred_alphas;
        if (method == EvalMethod::model) {
            RolloutResult r = rollout(gt.slice(0, 0, T), H, encoder, *kin, *predictor);
            pred_slots = r.slots;
            pred_frames = r.frames;
            pred_alphas = r.alphas;
        } else if (method == EvalMethod::copy_last_slot) {
            torch::Tensor last = gt_slots_all.select(0, T - 1);
            pred_slots = last.unsqueeze(0).expand({H, last.size(0), last.size(1)});
            auto [alphas, rgb, combined] = encoder->decode_batch(pred_slots);
            (void)rgb;
            pred_frames = combined;
            pred_alphas = alphas;
        } else {
            torch::Tensor frame = gt.select(0, T - 1);
            pred_frames = frame.unsqueeze(0).expand({H, frame.size(0), frame.size(1), 3});
            // Label and slot metrics for this baseline come from encoding the frozen video.
            torch::Tensor slots = encoder->encode_video_batch(pred_frames.unsqueeze(0)).squeeze(0);
            pred_slots = slots;
            auto [alphas, rgb, combined] =
                encoder->decode_batch(slots.reshape({H, slots.size(1), slots.size(2)}));
            (void)rgb;
            (void)combined;
            pred_alphas = alphas;
        }

        for (int64_t h = 0; h < H; ++h) {
            report.psnr_per_frame[static_cast<size_t>(h)] +=
                psnr(pred_frames[h], gt[T + h]);
            report.ssim_per_frame[static_cast<size_t>(h)] +=
                ssim(pred_frames[h], gt[T + h]);
            report.slot_error_per_frame[static_cast<size_t>(h)] +=
                (pred_slots[h] - gt_slots[h]).pow(2).sum(-1).sqrt().mean().item<double>();
        }
        torch::Tensor labels = predicted_labels(pred_alphas);
        torch::Tensor gt_labels = clip.gt_masks.slice(0, T, T + H).to(torch::kLong);
        ari_sum += fg_ari(labels, gt_labels, /*background_id=*/0);
        miou_sum += miou(labels, gt_labels, /*gt_background_id=*/0);
    }

    const double c = static_cast<double>(clips.size());
    for (int64_t h = 0; h < H; ++h) {
        report.psnr_per_frame[static_cast<size_t>(h)] /= c;
        report.ssim_per_frame[static_cast<size_t>(h)] /= c;
        report.slot_error_per_frame[static_cast<size_t>(h)] /= c;
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    report.mean_psnr = mean(report.psnr_per_frame);
    report.mean_ssim = mean(report.ssim_per_frame);
    report.slot_error = mean(report.slot_error_per_frame);
    report.fg_ari = ari_sum / c;
    report.miou = miou_sum / c;
    return report;
}

}  // namespace ock
