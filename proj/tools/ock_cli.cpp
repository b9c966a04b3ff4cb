// ock: corpus generation, two-stage training, evaluation, rollouts, ablation
// grids, and horizon-curve plots behind one executable.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <torch/torch.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ock/checkpoint.hpp"
#include "ock/config.hpp"
#include "ock/corpus.hpp"
#include "ock/eval.hpp"
#include "ock/image.hpp"
#include "ock/metrics.hpp"
#include "ock/plot.hpp"
#include "ock/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string data_dir;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_given = false;
};

struct PredictorOpts {
    std::string mode;  // joint | cross | baseline
    std::string kin;   // analytical | empirical
    std::string pe;    // temporal | vanilla
    bool teacher_forcing = false;
    int64_t horizon = 0;  // 0 = keep configured value
};

// Config resolution order: explicit --config, then run_config.json next to the
// corpus, then built-in defaults. --seed overrides the file, and sub-seeds
// left at 0 are derived from the master seed so one flag pins the whole run.
ock::RunConfig resolve_config(const CommonOpts& c) {
    ock::RunConfig cfg;
    if (!c.config_path.empty()) {
        cfg = ock::load_run_config(c.config_path);
    } else if (!c.data_dir.empty() && fs::exists(fs::path(c.data_dir) / "run_config.json")) {
        cfg = ock::load_run_config((fs::path(c.data_dir) / "run_config.json").string());
    }
    if (c.seed_given) cfg.seed = c.seed;
    if (cfg.scene.seed == 0) cfg.scene.seed = cfg.seed;
    if (cfg.enc_train.seed == 0) cfg.enc_train.seed = cfg.seed + 1;
    if (cfg.pred_train.seed == 0) cfg.pred_train.seed = cfg.seed + 2;
    return cfg;
}

void apply_predictor_opts(ock::RunConfig& cfg, const PredictorOpts& p) {
    if (!p.mode.empty()) cfg.predictor.mode = ock::predictor_mode_from(p.mode);
    if (!p.kin.empty()) cfg.predictor.kin_mode = ock::kin_mode_from(p.kin);
    if (!p.pe.empty()) cfg.predictor.pe_mode = ock::pe_mode_from(p.pe);
    if (p.teacher_forcing) cfg.pred_train.teacher_forcing = true;
    if (p.horizon > 0) cfg.predictor.horizon_H = p.horizon;
}

fs::path prepare_out_dir(const std::string& out, const ock::RunConfig& cfg) {
    if (out.empty()) throw std::invalid_argument("--out is required");
    fs::path dir(out);
    fs::create_directories(dir);
    ock::save_run_config((dir / "run_config.json").string(), cfg);
    return dir;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

std::vector<ock::VideoClip> load_clips(const std::string& data_dir) {
    if (data_dir.empty()) throw std::invalid_argument("--data is required");
    return ock::read_corpus(data_dir);
}

// The held-out tail of the corpus. eval_clips = 0 means no split was reserved;
// evaluation then runs over the full corpus.
std::vector<ock::VideoClip> eval_split(std::vector<ock::VideoClip> clips, int64_t eval_clips) {
    const int64_t n = static_cast<int64_t>(clips.size());
    if (eval_clips < 0 || eval_clips >= n) {
        throw std::invalid_argument("eval_clips must lie in [0, corpus size)");
    }
    if (eval_clips == 0) return clips;
    return {clips.end() - eval_clips, clips.end()};
}

std::vector<ock::VideoClip> train_split(std::vector<ock::VideoClip> clips, int64_t eval_clips) {
    const int64_t n = static_cast<int64_t>(clips.size());
    if (eval_clips < 0 || eval_clips >= n) {
        throw std::invalid_argument("eval_clips must lie in [0, corpus size)");
    }
    clips.resize(static_cast<size_t>(n - eval_clips));
    return clips;
}

int cmd_gen_data(const CommonOpts& c) {
    ock::RunConfig cfg = resolve_config(c);
    cfg.validate();
    fs::path dir = prepare_out_dir(c.out_dir, cfg);

    std::vector<ock::VideoClip> clips;
    clips.reserve(static_cast<size_t>(cfg.corpus_clips));
    for (int64_t i = 0; i < cfg.corpus_clips; ++i) {
        ock::SceneConfig sc = cfg.scene;
        sc.seed = cfg.scene.seed + static_cast<uint64_t>(i);
        clips.push_back(ock::simulate_clip(sc));
    }
    ock::CorpusManifest manifest = ock::write_corpus(clips, dir.string(), ock::config_hash(cfg));
    std::cout << "wrote " << manifest.clip_count << " clips (" << manifest.num_frames << "x"
              << manifest.image_size << "x" << manifest.image_size << ") to " << dir.string()
              << "\n";
    return 0;
}

int cmd_train_encoder(const CommonOpts& c) {
    ock::RunConfig cfg = resolve_config(c);
    cfg.validate();
    fs::path dir = prepare_out_dir(c.out_dir, cfg);

    auto clips = train_split(load_clips(c.data_dir), cfg.eval_clips);
    std::cout << "training encoder on " << clips.size() << " clips, " << cfg.enc_train.steps
              << " steps\n";
    std::vector<ock::TrainLogRow> log;
    ock::SlotEncoder encoder = ock::train_encoder(clips, cfg.encoder, cfg.enc_train, &log);

    ock::write_train_log((dir / "encoder_train_log.csv").string(), log);
    ock::save_encoder_checkpoint((dir / "encoder.ckpt").string(), encoder,
                                 {{"config_hash", ock::config_hash(cfg)},
                                  {"seed", cfg.enc_train.seed},
                                  {"steps", cfg.enc_train.steps}});
    if (!log.empty()) {
        std::cout << "final reconstruction loss " << log.back().l_total << "\n";
    }
    std::cout << "wrote " << (dir / "encoder.ckpt").string() << "\n";
    return 0;
}

int cmd_train_predictor(const CommonOpts& c, const PredictorOpts& p,
                        const std::string& encoder_path) {
    ock::RunConfig cfg = resolve_config(c);
    apply_predictor_opts(cfg, p);
    cfg.validate();
    fs::path dir = prepare_out_dir(c.out_dir, cfg);

    ock::SlotEncoder encoder = ock::load_encoder_checkpoint(encoder_path);
    if (encoder->config().slot_dim != cfg.predictor.slot_dim) {
        throw std::invalid_argument("predictor slot_dim does not match the encoder checkpoint");
    }
    auto clips = train_split(load_clips(c.data_dir), cfg.eval_clips);
    std::cout << "training " << ock::to_string(cfg.predictor.mode) << " predictor ("
              << ock::to_string(cfg.predictor.kin_mode) << " kinematics, "
              << ock::to_string(cfg.predictor.pe_mode) << " encoding"
              << (cfg.pred_train.teacher_forcing ? ", teacher forcing" : "") << ") on "
              << clips.size() << " clips, " << cfg.pred_train.steps << " steps\n";

    std::vector<ock::TrainLogRow> log;
    ock::PredictorBundle bundle =
        ock::train_predictor(clips, encoder, cfg.predictor, cfg.pred_train, &log);

    ock::write_train_log((dir / "predictor_train_log.csv").string(), log);
    ock::save_predictor_checkpoint((dir / "predictor.ckpt").string(), bundle,
                                   {{"config_hash", ock::config_hash(cfg)},
                                    {"seed", cfg.pred_train.seed},
                                    {"steps", cfg.pred_train.steps},
                                    {"teacher_forcing", cfg.pred_train.teacher_forcing}});
    if (!log.empty()) std::cout << "final loss " << log.back().l_total << "\n";
    std::cout << "wrote " << (dir / "predictor.ckpt").string() << "\n";
    return 0;
}

int cmd_evaluate(const CommonOpts& c, const std::string& encoder_path,
                 const std::string& predictor_path, const std::string& method_name,
                 int64_t horizon) {
    ock::RunConfig cfg = resolve_config(c);
    fs::path dir = prepare_out_dir(c.out_dir, cfg);

    ock::SlotEncoder encoder = ock::load_encoder_checkpoint(encoder_path);
    const ock::EvalMethod method = ock::eval_method_from(method_name);

    ock::PredictorBundle bundle;
    int64_t burn_in = cfg.predictor.history_T;
    int64_t H = horizon > 0 ? horizon : cfg.predictor.horizon_H;
    if (method == ock::EvalMethod::model) {
        if (predictor_path.empty()) {
            throw std::invalid_argument("--predictor is required with --method model");
        }
        bundle = ock::load_predictor_checkpoint(predictor_path);
        burn_in = bundle.predictor->config().history_T;
        if (horizon <= 0) H = bundle.predictor->config().horizon_H;
    }

    auto clips = eval_split(load_clips(c.data_dir), cfg.eval_clips);
    std::cout << "evaluating " << ock::to_string(method) << " on " << clips.size() << " clips, "
              << burn_in << " burn-in frames, horizon " << H << "\n";
    ock::EvalReport report = ock::evaluate_rollout(
        clips, burn_in, H, encoder, method == ock::EvalMethod::model ? &bundle.kin : nullptr,
        method == ock::EvalMethod::model ? &bundle.predictor : nullptr, method);

    nlohmann::json j = report.to_json();
    j["config_hash"] = ock::config_hash(cfg);
    write_json(dir / "eval_report.json", j);
    std::printf("psnr %.3f  ssim %.4f  fg_ari %.4f  miou %.4f  slot_error %.5f\n",
                report.mean_psnr, report.mean_ssim, report.fg_ari, report.miou, report.slot_error);
    std::cout << "wrote " << (dir / "eval_report.json").string() << "\n";
    return 0;
}

int cmd_rollout(const CommonOpts& c, const std::string& encoder_path,
                const std::string& predictor_path, int64_t clip_index, int64_t horizon) {
    ock::RunConfig cfg = resolve_config(c);
    fs::path dir = prepare_out_dir(c.out_dir, cfg);

    ock::SlotEncoder encoder = ock::load_encoder_checkpoint(encoder_path);
    ock::PredictorBundle bundle = ock::load_predictor_checkpoint(predictor_path);
    const int64_t T = bundle.predictor->config().history_T;
    const int64_t H = horizon > 0 ? horizon : bundle.predictor->config().horizon_H;

    auto clips = load_clips(c.data_dir);
    if (clip_index < 0 || clip_index >= static_cast<int64_t>(clips.size())) {
        throw std::invalid_argument("--clip index out of range");
    }
    const ock::VideoClip& clip = clips[static_cast<size_t>(clip_index)];
    if (clip.num_frames() < T + H) {
        throw std::invalid_argument("clip is shorter than burn-in + horizon");
    }

    ock::RolloutResult result = ock::rollout(
        clip.frames.slice(0, 0, T), H, encoder, bundle.kin, bundle.predictor);

    std::vector<double> frame_psnr, frame_ssim;
    for (int64_t h = 0; h < H; ++h) {
        torch::Tensor pred = result.frames[h];
        torch::Tensor gt = clip.frames[T + h];
        frame_psnr.push_back(ock::psnr(pred, gt));
        frame_ssim.push_back(ock::ssim(pred, gt));
        char name[32];
        std::snprintf(name, sizeof(name), "pred_%02lld.png", static_cast<long long>(h));
        ock::write_png((dir / name).string(), pred);
        std::snprintf(name, sizeof(name), "gt_%02lld.png", static_cast<long long>(h));
        ock::write_png((dir / name).string(), gt);
    }

    torch::Tensor truth = clip.frames.slice(0, 0, T + H);
    torch::Tensor predicted = torch::cat({clip.frames.slice(0, 0, T), result.frames}, 0);
    torch::Tensor strip = ock::render_frame_strip({truth, predicted}, {"TRUTH", "MODEL"},
                                                  static_cast<int>(T + H));
    ock::write_png((dir / "strip.png").string(), strip);
    torch::Tensor traj = ock::render_trajectories(clip.frames[T + H - 1], result.positions);
    ock::write_png((dir / "trajectories.png").string(), traj);

    nlohmann::json j = {{"clip", clip_index},
                        {"burn_in", T},
                        {"horizon", H},
                        {"psnr_per_frame", frame_psnr},
                        {"ssim_per_frame", frame_ssim},
                        {"config_hash", ock::config_hash(cfg)}};
    write_json(dir / "rollout.json", j);
    std::printf("rollout clip %lld: psnr[0] %.3f psnr[%lld] %.3f\n",
                static_cast<long long>(clip_index), frame_psnr.front(),
                static_cast<long long>(H - 1), frame_psnr.back());
    std::cout << "wrote " << (dir / "strip.png").string() << "\n";
    return 0;
}

struct AblationRow {
    std::string name;
    ock::PredictorConfig predictor;
    bool teacher_forcing = false;
};

std::vector<AblationRow> ablation_grid(const std::string& grid, const ock::PredictorConfig& base) {
    auto with = [&](const std::string& name, auto&& tweak, bool tf = false) {
        AblationRow row{name, base, tf};
        row.predictor.mode = ock::PredictorMode::joint;
        row.predictor.kin_mode = ock::KinMode::analytical;
        tweak(row.predictor);
        return row;
    };
    auto keep = [](ock::PredictorConfig&) {};

    if (grid == "table4") {
        // Component grid: cross/joint bases, then joint variants touching one
        // knob each (history length, depth, positional encoding, feedback).
        std::vector<AblationRow> rows;
        rows.push_back(with("cross_analytical", [](ock::PredictorConfig& p) {
            p.mode = ock::PredictorMode::cross;
        }));
        rows.push_back(with("joint_analytical", keep));
        rows.push_back(with("input_frames_4", [](ock::PredictorConfig& p) { p.history_T = 4; }));
        rows.push_back(with("input_frames_8", [](ock::PredictorConfig& p) { p.history_T = 8; }));
        rows.push_back(with("layers_6", [](ock::PredictorConfig& p) { p.layers = 6; }));
        rows.push_back(with("layers_8", [](ock::PredictorConfig& p) { p.layers = 8; }));
        rows.push_back(with("vanilla_pe", [](ock::PredictorConfig& p) {
            p.pe_mode = ock::PeMode::vanilla;
        }));
        rows.push_back(with("teacher_forcing", keep, true));
        return rows;
    }
    if (grid == "table5") {
        // Kinematics grid: both attention couplings x both kinematics sources,
        // plus the kinematics-free transformer.
        std::vector<AblationRow> rows;
        rows.push_back(with("cross_analytical", [](ock::PredictorConfig& p) {
            p.mode = ock::PredictorMode::cross;
        }));
        rows.push_back(with("joint_analytical", keep));
        rows.push_back(with("cross_empirical", [](ock::PredictorConfig& p) {
            p.mode = ock::PredictorMode::cross;
            p.kin_mode = ock::KinMode::empirical;
        }));
        rows.push_back(with("joint_empirical", [](ock::PredictorConfig& p) {
            p.kin_mode = ock::KinMode::empirical;
        }));
        rows.push_back(with("baseline", [](ock::PredictorConfig& p) {
            p.mode = ock::PredictorMode::baseline;
        }));
        return rows;
    }
    throw std::invalid_argument("unknown grid '" + grid + "' (expected table4 or table5)");
}

int cmd_ablate(const CommonOpts& c, const std::string& encoder_path, const std::string& grid,
               int64_t horizon) {
    ock::RunConfig cfg = resolve_config(c);
    cfg.validate();
    fs::path dir = prepare_out_dir(c.out_dir, cfg);

    ock::SlotEncoder encoder = ock::load_encoder_checkpoint(encoder_path);
    auto clips = load_clips(c.data_dir);
    auto train_clips = train_split(clips, cfg.eval_clips);
    auto held_out = eval_split(clips, cfg.eval_clips);
    const int64_t H = horizon > 0 ? horizon : cfg.predictor.horizon_H;

    std::vector<AblationRow> rows = ablation_grid(grid, cfg.predictor);
    nlohmann::json table = nlohmann::json::array();
    std::printf("%-18s %8s %8s %8s %8s %10s\n", "method", "psnr", "ssim", "fg_ari", "miou",
                "slot_err");
    for (const AblationRow& row : rows) {
        ock::TrainConfig tc = cfg.pred_train;
        tc.teacher_forcing = row.teacher_forcing;
        row.predictor.validate();
        ock::PredictorBundle bundle = ock::train_predictor(train_clips, encoder, row.predictor, tc);

        fs::path row_dir = dir / row.name;
        fs::create_directories(row_dir);
        ock::save_predictor_checkpoint((row_dir / "predictor.ckpt").string(), bundle,
                                       {{"config_hash", ock::config_hash(cfg)},
                                        {"ablation_row", row.name}});
        ock::EvalReport report = ock::evaluate_rollout(held_out, row.predictor.history_T, H,
                                                       encoder, &bundle.kin, &bundle.predictor);
        nlohmann::json rj = report.to_json();
        rj["name"] = row.name;
        rj["config_hash"] = ock::config_hash(cfg);
        write_json(row_dir / "eval_report.json", rj);
        table.push_back({{"name", row.name},
                         {"psnr", report.mean_psnr},
                         {"ssim", report.mean_ssim},
                         {"fg_ari", report.fg_ari},
                         {"miou", report.miou},
                         {"slot_error", report.slot_error}});
        std::printf("%-18s %8.3f %8.4f %8.4f %8.4f %10.5f\n", row.name.c_str(), report.mean_psnr,
                    report.mean_ssim, report.fg_ari, report.miou, report.slot_error);
    }
    write_json(dir / ("ablation_" + grid + ".json"),
               {{"grid", grid}, {"horizon", H}, {"rows", table},
                {"config_hash", ock::config_hash(cfg)}});
    std::cout << "wrote " << (dir / ("ablation_" + grid + ".json")).string() << "\n";
    return 0;
}

int cmd_plot(const std::vector<std::string>& reports, const std::string& metric,
             const std::string& out_dir) {
    if (reports.empty()) throw std::invalid_argument("at least one --report is required");
    if (out_dir.empty()) throw std::invalid_argument("--out is required");

    ock::PlotSpec spec;
    spec.x_label = "predicted frame";
    spec.y_label = metric;
    spec.title = "prediction horizon vs " + metric;
    for (const std::string& path : reports) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open report " + path);
        nlohmann::json j;
        in >> j;
        ock::EvalReport report = ock::EvalReport::from_json(j);
        const std::vector<double>* curve = nullptr;
        if (metric == "psnr") curve = &report.psnr_per_frame;
        else if (metric == "ssim") curve = &report.ssim_per_frame;
        else if (metric == "slot_error") curve = &report.slot_error_per_frame;
        else throw std::invalid_argument("unknown metric '" + metric + "'");
        ock::PlotSeries series;
        series.label = j.value("name", report.method);
        for (size_t i = 0; i < curve->size(); ++i) {
            series.x.push_back(static_cast<double>(i + 1));
            series.y.push_back((*curve)[i]);
        }
        spec.series.push_back(std::move(series));
    }
    fs::create_directories(out_dir);
    fs::path png = fs::path(out_dir) / ("horizon_" + metric + ".png");
    ock::write_plot(png.string(), spec);
    std::cout << "wrote " << png.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"object-centric video prediction pipeline"};
    app.require_subcommand(1);

    CommonOpts common;
    PredictorOpts pred;
    std::string encoder_path, predictor_path;
    std::string method = "model", grid = "table4", metric = "psnr";
    std::vector<std::string> reports;
    int64_t horizon = 0, clip_index = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_data) {
        cmd->add_option("--config", common.config_path, "run configuration (JSON)");
        cmd->add_option("--out", common.out_dir, "output directory")->required();
        cmd->add_option("--seed", common.seed, "master seed override")
            ->each([&](const std::string&) { common.seed_given = true; });
        if (needs_data) {
            cmd->add_option("--data", common.data_dir, "corpus directory")->required();
        }
    };

    CLI::App* gen = app.add_subcommand("gen-data", "simulate a clip corpus");
    add_common(gen, false);

    CLI::App* tenc = app.add_subcommand("train-encoder", "stage 1: reconstruction training");
    add_common(tenc, true);

    CLI::App* tpred = app.add_subcommand("train-predictor", "stage 2: dynamics training");
    add_common(tpred, true);
    tpred->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    tpred->add_option("--mode", pred.mode, "joint | cross | baseline");
    tpred->add_option("--kin", pred.kin, "analytical | empirical");
    tpred->add_option("--pe", pred.pe, "temporal | vanilla");
    tpred->add_flag("--teacher-forcing", pred.teacher_forcing,
                    "feed observed slots back during training");
    tpred->add_option("--horizon", pred.horizon, "training unroll length");

    CLI::App* ev = app.add_subcommand("evaluate", "metrics over the held-out split");
    add_common(ev, true);
    ev->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    ev->add_option("--predictor", predictor_path, "predictor checkpoint");
    ev->add_option("--method", method, "model | copy_last_slot | copy_last_frame");
    ev->add_option("--horizon", horizon, "prediction length (default: trained horizon)");

    CLI::App* roll = app.add_subcommand("rollout", "render one clip's prediction");
    add_common(roll, true);
    roll->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    roll->add_option("--predictor", predictor_path, "predictor checkpoint")->required();
    roll->add_option("--clip", clip_index, "corpus clip index");
    roll->add_option("--horizon", horizon, "prediction length (default: trained horizon)");

    CLI::App* abl = app.add_subcommand("ablate", "train and score a comparison grid");
    add_common(abl, true);
    abl->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
    abl->add_option("--grid", grid, "table4 (components) | table5 (kinematics)");
    abl->add_option("--horizon", horizon, "evaluation length (default: configured horizon)");

    CLI::App* plt = app.add_subcommand("plot", "render horizon curves from eval reports");
    plt->add_option("--report", reports, "eval_report.json (repeatable)")->required();
    plt->add_option("--metric", metric, "psnr | ssim | slot_error");
    plt->add_option("--out", common.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(gen)) return cmd_gen_data(common);
        if (app.got_subcommand(tenc)) return cmd_train_encoder(common);
        if (app.got_subcommand(tpred)) return cmd_train_predictor(common, pred, encoder_path);
        if (app.got_subcommand(ev)) {
            return cmd_evaluate(common, encoder_path, predictor_path, method, horizon);
        }
        if (app.got_subcommand(abl)) return cmd_ablate(common, encoder_path, grid, horizon);
        if (app.got_subcommand(plt)) return cmd_plot(reports, metric, common.out_dir);
        return cmd_rollout(common, encoder_path, predictor_path, clip_index, horizon);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
