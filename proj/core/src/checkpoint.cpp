#include "ock/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "ock/config.hpp"
#include "ock/tensor_io.hpp"

namespace ock {

namespace {

constexpr char kMagic[4] = {'O', 'C', 'K', 'C'};

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw std::runtime_error("checkpoint: truncated while reading " + what);
    }
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, torch::Tensor>>& tensors,
                     nlohmann::json metadata) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kMagic, 4);
    put_u32(out, kCheckpointFormatVersion);
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    nlohmann::json names = nlohmann::json::array();
    for (const auto& [name, tensor] : tensors) {
        put_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_tensor(out, tensor);
        names.push_back(name);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
    out.close();

    metadata["format_version"] = kCheckpointFormatVersion;
    metadata["tensors"] = names;
    std::ofstream meta(path + ".json");
    if (!meta) throw std::runtime_error("checkpoint: cannot write " + path + ".json");
    meta << metadata.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    const uint32_t version = get_u32(in, "version");
    if (version != kCheckpointFormatVersion) {
        throw std::runtime_error("checkpoint: " + path + " has format version " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointFormatVersion));
    }
    const uint32_t count = get_u32(in, "tensor count");
    Checkpoint ckpt;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t len = get_u32(in, "name length");
        if (len > 4096) throw std::runtime_error("checkpoint: implausible name length in " + path);
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) {
            throw std::runtime_error("checkpoint: truncated name in " + path);
        }
        ckpt.tensors[name] = read_tensor(in, path + ":" + name);
    }

    std::ifstream meta(path + ".json");
    if (meta) {
        try {
            meta >> ckpt.metadata;
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("checkpoint: corrupt metadata " + path + ".json: " + e.what());
        }
    } else {
        ckpt.metadata = nlohmann::json::object();
    }
    return ckpt;
}

void save_module_checkpoint(const std::string& path, const torch::nn::Module& module,
                            const std::string& kind, nlohmann::json extra) {
    std::vector<std::pair<std::string, torch::Tensor>> tensors;
    for (const auto& p : module.named_parameters(/*recurse=*/true)) {
        tensors.emplace_back(p.key(), p.value().detach());
    }
    for (const auto& b : module.named_buffers(/*recurse=*/true)) {
        tensors.emplace_back(b.key(), b.value().detach());
    }
    extra["kind"] = kind;
    save_checkpoint(path, tensors, std::move(extra));
}

nlohmann::json load_module_checkpoint(const std::string& path, torch::nn::Module& module,
                                      const std::string& kind) {
    Checkpoint ckpt = load_checkpoint(path);
    const std::string stored = ckpt.metadata.value("kind", "");
    if (stored != kind) {
        throw std::runtime_error("checkpoint: " + path + " holds '" + stored + "' weights, need '" +
                                 kind + "'");
    }
    torch::NoGradGuard guard;
    size_t used = 0;
    auto copy_into = [&](const std::string& name, torch::Tensor dst) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) {
            throw std::runtime_error("checkpoint: " + path + " is missing tensor '" + name + "'");
        }
        if (it->second.sizes() != dst.sizes()) {
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "' in " + path);
        }
        dst.copy_(it->second.to(dst.dtype()));
        ++used;
    };
    for (const auto& p : module.named_parameters(true)) copy_into(p.key(), p.value());
    for (const auto& b : module.named_buffers(true)) copy_into(b.key(), b.value());
    if (used != ckpt.tensors.size()) {
        throw std::runtime_error("checkpoint: " + path + " holds " +
                                 std::to_string(ckpt.tensors.size()) + " tensors but the module has " +
                                 std::to_string(used));
    }
    return ckpt.metadata;
}

void save_encoder_checkpoint(const std::string& path, SlotEncoder& encoder, nlohmann::json extra) {
    extra["encoder_config"] = to_json(encoder->config());
    save_module_checkpoint(path, *encoder, "encoder", std::move(extra));
}

SlotEncoder load_encoder_checkpoint(const std::string& path, nlohmann::json* metadata) {
    Checkpoint probe = load_checkpoint(path);
    if (!probe.metadata.contains("encoder_config")) {
        throw std::runtime_error("checkpoint: " + path + " has no encoder_config metadata");
    }
    SlotEncoder encoder(encoder_config_from_json(probe.metadata["encoder_config"]));
    nlohmann::json meta = load_module_checkpoint(path, *encoder, "encoder");
    if (metadata) *metadata = std::move(meta);
    encoder->eval();
    return encoder;
}

namespace {

// Copies the checkpoint tensors carrying `prefix` into `module`, stripping the prefix.
// Every module tensor must be present; count bookkeeping happens at the caller.
size_t copy_prefixed(const Checkpoint& ckpt, const std::string& path, const std::string& prefix,
                     torch::nn::Module& module) {
    torch::NoGradGuard guard;
    size_t used = 0;
    auto copy_into = [&](const std::string& name, torch::Tensor dst) {
        auto it = ckpt.tensors.find(prefix + name);
        if (it == ckpt.tensors.end()) {
            throw std::runtime_error("checkpoint: " + path + " is missing tensor '" + prefix + name +
                                     "'");
        }
        if (it->second.sizes() != dst.sizes()) {
            throw std::runtime_error("checkpoint: shape mismatch for '" + prefix + name + "' in " +
                                     path);
        }
        dst.copy_(it->second.to(dst.dtype()));
        ++used;
    };
    for (const auto& p : module.named_parameters(true)) copy_into(p.key(), p.value());
    for (const auto& b : module.named_buffers(true)) copy_into(b.key(), b.value());
    return used;
}

}  // namespace

void save_predictor_checkpoint(const std::string& path, const PredictorBundle& bundle,
                               nlohmann::json extra) {
    if (bundle.predictor.is_empty() || bundle.kin.is_empty()) {
        throw std::invalid_argument("checkpoint: predictor bundle is incomplete");
    }
    std::vector<std::pair<std::string, torch::Tensor>> tensors;
    auto grab = [&](const torch::nn::Module& m, const std::string& prefix) {
        for (const auto& p : m.named_parameters(true)) {
            tensors.emplace_back(prefix + p.key(), p.value().detach());
        }
        for (const auto& b : m.named_buffers(true)) {
            tensors.emplace_back(prefix + b.key(), b.value().detach());
        }
    };
    grab(*bundle.predictor, "predictor.");
    grab(*bundle.kin, "kin.");
    extra["kind"] = "predictor";
    extra["predictor_config"] = to_json(bundle.predictor->config());
    extra["kin"] = {{"embed_dim", bundle.kin->embed_dim()},
                    {"hidden", bundle.kin->hidden()},
                    {"delta", bundle.kin->delta()}};
    save_checkpoint(path, tensors, std::move(extra));
}

PredictorBundle load_predictor_checkpoint(const std::string& path, nlohmann::json* metadata) {
    Checkpoint ckpt = load_checkpoint(path);
    const std::string stored = ckpt.metadata.value("kind", "");
    if (stored != "predictor") {
        throw std::runtime_error("checkpoint: " + path + " holds '" + stored +
                                 "' weights, need 'predictor'");
    }
    if (!ckpt.metadata.contains("predictor_config") || !ckpt.metadata.contains("kin")) {
        throw std::runtime_error("checkpoint: " + path + " lacks predictor_config or kin metadata");
    }
    PredictorBundle bundle;
    bundle.predictor = Predictor(predictor_config_from_json(ckpt.metadata["predictor_config"]));
    const auto& kj = ckpt.metadata["kin"];
    bundle.kin = Kinematics(kj.at("embed_dim").get<int64_t>(), kj.at("hidden").get<int64_t>(),
                            kj.at("delta").get<double>());
    size_t used = copy_prefixed(ckpt, path, "predictor.", *bundle.predictor);
    used += copy_prefixed(ckpt, path, "kin.", *bundle.kin);
    if (used != ckpt.tensors.size()) {
        throw std::runtime_error("checkpoint: " + path + " holds " +
                                 std::to_string(ckpt.tensors.size()) +
                                 " tensors but the bundle has " + std::to_string(used));
    }
    bundle.predictor->eval();
    bundle.kin->eval();
    if (metadata) *metadata = std::move(ckpt.metadata);
    return bundle;
}

}  // namespace ock
