#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>

#include "ock/predictor.hpp"
#include "ock/scene.hpp"
#include "ock/slot_encoder.hpp"
#include "ock/trainer.hpp"

namespace ock {

// Everything one experiment needs, serializable as a single JSON document.
// Parsing is strict: unknown keys anywhere in the tree are an error.
struct RunConfig {
    SceneConfig scene;
    EncoderConfig encoder;
    PredictorConfig predictor;
    TrainConfig enc_train;
    TrainConfig pred_train;
    int64_t corpus_clips = 500;
    int64_t eval_clips = 50;  // held-out tail of the corpus
    std::string out_dir = "out";
    uint64_t seed = 0;

    RunConfig();
    void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json to_json(const EncoderConfig& cfg);
nlohmann::json to_json(const PredictorConfig& cfg);

// Missing keys keep their defaults; unknown keys throw with their path.
RunConfig run_config_from_json(const nlohmann::json& j);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);
PredictorConfig predictor_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

// FNV-1a over the canonical (sorted-key) dump, as 16 hex digits. Stamped into
// every artifact so outputs can be traced back to the exact configuration.
std::string config_hash(const nlohmann::json& j);
std::string config_hash(const RunConfig& cfg);

}  // namespace ock
