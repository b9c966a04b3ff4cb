#include "ock/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace ock {

namespace {

std::string shape_name(Shape s) {
    switch (s) {
        case Shape::circle: return "circle";
        case Shape::square: return "square";
        case Shape::triangle: return "triangle";
    }
    throw std::logic_error("unhandled shape");
}

Shape shape_from(const std::string& s) {
    if (s == "circle") return Shape::circle;
    if (s == "square") return Shape::square;
    if (s == "triangle") return Shape::triangle;
    throw std::invalid_argument("unknown shape '" + s + "'");
}

// Pulls a value if the key is present and records the key as consumed.
template <typename T>
void take(const nlohmann::json& j, std::set<std::string>& seen, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) {
        out = it->get<T>();
        seen.insert(key);
    }
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& seen,
                    const std::string& path) {
    if (!j.is_object()) {
        throw std::invalid_argument("config: expected an object at '" + path + "'");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!seen.count(it.key())) {
            throw std::invalid_argument("config: unknown key '" + path + it.key() + "'");
        }
    }
}

void scene_from_json(const nlohmann::json& j, SceneConfig& c, const std::string& path) {
    std::set<std::string> seen;
    take(j, seen, "num_objects", c.num_objects);
    take(j, seen, "image_size", c.image_size);
    take(j, seen, "num_frames", c.num_frames);
    take(j, seen, "speed_min", c.speed_min);
    take(j, seen, "speed_max", c.speed_max);
    take(j, seen, "restitution", c.restitution);
    take(j, seen, "seed", c.seed);
    take(j, seen, "collisions", c.collisions);
    take(j, seen, "radius_min", c.radius_min);
    take(j, seen, "radius_max", c.radius_max);
    if (auto it = j.find("shape_palette"); it != j.end()) {
        seen.insert("shape_palette");
        c.shape_palette.clear();
        for (const auto& s : *it) c.shape_palette.push_back(shape_from(s.get<std::string>()));
    }
    reject_unknown(j, seen, path);
}

void encoder_from_json(const nlohmann::json& j, EncoderConfig& c, const std::string& path) {
    std::set<std::string> seen;
    take(j, seen, "num_slots", c.num_slots);
    take(j, seen, "slot_dim", c.slot_dim);
    take(j, seen, "feat_dim", c.feat_dim);
    take(j, seen, "channels", c.channels);
    take(j, seen, "kernel", c.kernel);
    take(j, seen, "iters_first", c.iters_first);
    take(j, seen, "iters_later", c.iters_later);
    take(j, seen, "dec_grid", c.dec_grid);
    take(j, seen, "dec_hidden", c.dec_hidden);
    take(j, seen, "image_size", c.image_size);
    take(j, seen, "epsilon", c.epsilon);
    if (auto it = j.find("strides"); it != j.end()) {
        seen.insert("strides");
        auto v = it->get<std::vector<int64_t>>();
        if (v.size() != c.strides.size()) {
            throw std::invalid_argument("config: " + path + "strides needs exactly 4 entries");
        }
        std::copy(v.begin(), v.end(), c.strides.begin());
    }
    reject_unknown(j, seen, path);
}

void predictor_from_json(const nlohmann::json& j, PredictorConfig& c, const std::string& path) {
    std::set<std::string> seen;
    std::string mode = to_string(c.mode), kin = to_string(c.kin_mode), pe = to_string(c.pe_mode);
    take(j, seen, "mode", mode);
    take(j, seen, "kin_mode", kin);
    take(j, seen, "pe_mode", pe);
    take(j, seen, "layers", c.layers);
    take(j, seen, "heads", c.heads);
    take(j, seen, "d_model", c.d_model);
    take(j, seen, "history_T", c.history_T);
    take(j, seen, "horizon_H", c.horizon_H);
    take(j, seen, "slot_dim", c.slot_dim);
    take(j, seen, "kin_dim", c.kin_dim);
    take(j, seen, "tau_init", c.tau_init);
    c.mode = predictor_mode_from(mode);
    c.kin_mode = kin_mode_from(kin);
    c.pe_mode = pe_mode_from(pe);
    reject_unknown(j, seen, path);
}

void train_from_json(const nlohmann::json& j, TrainConfig& c, const std::string& path) {
    std::set<std::string> seen;
    take(j, seen, "alpha", c.alpha);
    take(j, seen, "lr", c.lr);
    take(j, seen, "steps", c.steps);
    take(j, seen, "batch_size", c.batch_size);
    take(j, seen, "teacher_forcing", c.teacher_forcing);
    take(j, seen, "seed", c.seed);
    take(j, seen, "grad_clip", c.grad_clip);
    take(j, seen, "squared_losses", c.squared_losses);
    take(j, seen, "log_every", c.log_every);
    reject_unknown(j, seen, path);
}

nlohmann::json scene_to_json(const SceneConfig& c) {
    nlohmann::json palette = nlohmann::json::array();
    for (Shape s : c.shape_palette) palette.push_back(shape_name(s));
    return {{"num_objects", c.num_objects},   {"image_size", c.image_size},
            {"num_frames", c.num_frames},     {"shape_palette", palette},
            {"speed_min", c.speed_min},       {"speed_max", c.speed_max},
            {"restitution", c.restitution},   {"seed", c.seed},
            {"collisions", c.collisions},     {"radius_min", c.radius_min},
            {"radius_max", c.radius_max}};
}

nlohmann::json encoder_to_json_impl(const EncoderConfig& c) {
    return {{"num_slots", c.num_slots}, {"slot_dim", c.slot_dim},
            {"feat_dim", c.feat_dim},   {"channels", c.channels},
            {"kernel", c.kernel},       {"strides", c.strides},
            {"iters_first", c.iters_first}, {"iters_later", c.iters_later},
            {"dec_grid", c.dec_grid},   {"dec_hidden", c.dec_hidden},
            {"image_size", c.image_size}, {"epsilon", c.epsilon}};
}

nlohmann::json predictor_to_json_impl(const PredictorConfig& c) {
    return {{"mode", to_string(c.mode)},     {"kin_mode", to_string(c.kin_mode)},
            {"pe_mode", to_string(c.pe_mode)}, {"layers", c.layers},
            {"heads", c.heads},              {"d_model", c.d_model},
            {"history_T", c.history_T},      {"horizon_H", c.horizon_H},
            {"slot_dim", c.slot_dim},        {"kin_dim", c.kin_dim},
            {"tau_init", c.tau_init}};
}

nlohmann::json train_to_json(const TrainConfig& c) {
    return {{"alpha", c.alpha},
            {"lr", c.lr},
            {"steps", c.steps},
            {"batch_size", c.batch_size},
            {"teacher_forcing", c.teacher_forcing},
            {"seed", c.seed},
            {"grad_clip", c.grad_clip},
            {"squared_losses", c.squared_losses},
            {"log_every", c.log_every}};
}

}  // namespace

RunConfig::RunConfig() {
    enc_train.steps = 1500;
    enc_train.batch_size = 8;
    enc_train.alpha = 0.0;  // stage 1 has no slot target, only reconstruction
    pred_train.steps = 600;
    pred_train.batch_size = 8;
}

void RunConfig::validate() const {
    scene.validate();
    encoder.validate();
    predictor.validate();
    enc_train.validate();
    pred_train.validate();
    if (corpus_clips < 1) throw std::invalid_argument("config: corpus_clips must be >= 1");
    if (eval_clips < 0 || eval_clips >= corpus_clips) {
        throw std::invalid_argument("config: eval_clips must lie in [0, corpus_clips)");
    }
    if (encoder.image_size != scene.image_size) {
        throw std::invalid_argument("config: encoder.image_size must match scene.image_size");
    }
    if (predictor.slot_dim != encoder.slot_dim) {
        throw std::invalid_argument("config: predictor.slot_dim must match encoder.slot_dim");
    }
    if (predictor.history_T + predictor.horizon_H > scene.num_frames) {
        throw std::invalid_argument("config: history_T + horizon_H exceeds clip length");
    }
}

nlohmann::json to_json(const RunConfig& cfg) {
    return {{"scene", scene_to_json(cfg.scene)},
            {"encoder", encoder_to_json_impl(cfg.encoder)},
            {"predictor", predictor_to_json_impl(cfg.predictor)},
            {"enc_train", train_to_json(cfg.enc_train)},
            {"pred_train", train_to_json(cfg.pred_train)},
            {"corpus_clips", cfg.corpus_clips},
            {"eval_clips", cfg.eval_clips},
            {"out_dir", cfg.out_dir},
            {"seed", cfg.seed}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    std::set<std::string> seen;
    try {
        if (auto it = j.find("scene"); it != j.end()) {
            seen.insert("scene");
            scene_from_json(*it, cfg.scene, "scene.");
        }
        if (auto it = j.find("encoder"); it != j.end()) {
            seen.insert("encoder");
            encoder_from_json(*it, cfg.encoder, "encoder.");
        }
        if (auto it = j.find("predictor"); it != j.end()) {
            seen.insert("predictor");
            predictor_from_json(*it, cfg.predictor, "predictor.");
        }
        if (auto it = j.find("enc_train"); it != j.end()) {
            seen.insert("enc_train");
            train_from_json(*it, cfg.enc_train, "enc_train.");
        }
        if (auto it = j.find("pred_train"); it != j.end()) {
            seen.insert("pred_train");
            train_from_json(*it, cfg.pred_train, "pred_train.");
        }
        take(j, seen, "corpus_clips", cfg.corpus_clips);
        take(j, seen, "eval_clips", cfg.eval_clips);
        take(j, seen, "out_dir", cfg.out_dir);
        take(j, seen, "seed", cfg.seed);
    } catch (const nlohmann::json::exception& e) {
        // A mistyped value is a configuration error, same as an unknown key.
        throw std::invalid_argument("config: " + std::string(e.what()));
    }
    reject_unknown(j, seen, "");
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: " + path + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << to_json(cfg).dump(2) << "\n";
}

nlohmann::json to_json(const EncoderConfig& cfg) { return encoder_to_json_impl(cfg); }

nlohmann::json to_json(const PredictorConfig& cfg) { return predictor_to_json_impl(cfg); }

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
    EncoderConfig cfg;
    try {
        encoder_from_json(j, cfg, "encoder.");
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: " + std::string(e.what()));
    }
    cfg.validate();
    return cfg;
}

PredictorConfig predictor_config_from_json(const nlohmann::json& j) {
    PredictorConfig cfg;
    try {
        predictor_from_json(j, cfg, "predictor.");
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config: " + std::string(e.what()));
    }
    cfg.validate();
    return cfg;
}

std::string config_hash(const nlohmann::json& j) {
    const std::string canon = j.dump();  // nlohmann objects iterate in sorted key order
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const RunConfig& cfg) { return config_hash(to_json(cfg)); }

}  // namespace ock
