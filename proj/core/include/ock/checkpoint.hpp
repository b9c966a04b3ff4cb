#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "ock/trainer.hpp"

namespace ock {

inline constexpr uint32_t kCheckpointFormatVersion = 1;

// On disk: <path> holds the named tensors (count, then length-prefixed names with
// the shared tensor container format), <path>.json holds the metadata.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, torch::Tensor>>& tensors,
                     nlohmann::json metadata);

struct Checkpoint {
    std::map<std::string, torch::Tensor> tensors;
    nlohmann::json metadata;
};

Checkpoint load_checkpoint(const std::string& path);

// Snapshots a module's parameters and buffers. `kind` tags what the weights are
// (e.g. "encoder", "predictor") and is checked on load.
void save_module_checkpoint(const std::string& path, const torch::nn::Module& module,
                            const std::string& kind, nlohmann::json extra = nlohmann::json::object());

// Copies stored tensors into an already-constructed module. Missing names, extra
// names, shape mismatches, kind or version mismatches all throw.
nlohmann::json load_module_checkpoint(const std::string& path, torch::nn::Module& module,
                                      const std::string& kind);

// Encoder and predictor-bundle checkpoints embed their module configs, so loading
// needs nothing but the file.
void save_encoder_checkpoint(const std::string& path, SlotEncoder& encoder,
                             nlohmann::json extra = nlohmann::json::object());
SlotEncoder load_encoder_checkpoint(const std::string& path, nlohmann::json* metadata = nullptr);

void save_predictor_checkpoint(const std::string& path, const PredictorBundle& bundle,
                               nlohmann::json extra = nlohmann::json::object());
PredictorBundle load_predictor_checkpoint(const std::string& path,
                                          nlohmann::json* metadata = nullptr);

}  // namespace ock
