#include "ock/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ock/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ock {

namespace {

const char* kFields[4] = {"frames", "gt_masks", "gt_positions", "gt_velocities"};

std::string blob_name(int64_t idx, const std::string& field) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "clip_%04lld_%s.bin", static_cast<long long>(idx),
                  field.c_str());
    return buf;
}

json manifest_to_json(const CorpusManifest& m) {
    json j;
    j["format_version"] = m.format_version;
    j["clip_count"] = m.clip_count;
    j["num_objects"] = m.num_objects;
    j["image_size"] = m.image_size;
    j["num_frames"] = m.num_frames;
    j["dtype"] = m.dtype;
    j["seeds"] = m.seeds;
    j["fields"] = json::array({"frames", "gt_masks", "gt_positions", "gt_velocities"});
    j["frame_shape"] = json::array({m.num_frames, m.image_size, m.image_size, 3});
    if (!m.config_hash.empty()) j["config_hash"] = m.config_hash;
    return j;
}

}  // namespace

CorpusManifest write_corpus(const std::vector<VideoClip>& clips, const std::string& dir,
                            const std::string& config_hash) {
    if (clips.empty()) {
        throw std::runtime_error("write_corpus: no clips");
    }
    fs::create_directories(dir);
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    if (fs::exists(manifest_path)) {
        CorpusManifest existing = read_manifest(dir);
        if (existing.format_version != kCorpusFormatVersion) {
            throw std::runtime_error("write_corpus: directory holds corpus format version " +
                                     std::to_string(existing.format_version) +
                                     ", refusing to overwrite");
        }
    }

    CorpusManifest m;
    m.clip_count = static_cast<int64_t>(clips.size());
    m.num_objects = clips[0].num_objects();
    m.image_size = clips[0].image_size();
    m.num_frames = clips[0].num_frames();
    m.config_hash = config_hash;
    for (const auto& c : clips) {
        if (c.num_frames() != m.num_frames || c.image_size() != m.image_size ||
            c.num_objects() != m.num_objects) {
            throw std::runtime_error("write_corpus: clips have inconsistent shapes");
        }
        m.seeds.push_back(c.seed);
    }

    // Blobs first; the manifest is written last so a complete manifest
    // implies a complete corpus.
    for (int64_t i = 0; i < m.clip_count; ++i) {
        const VideoClip& c = clips[static_cast<size_t>(i)];
        write_tensor_file((fs::path(dir) / blob_name(i, "frames")).string(), c.frames);
        write_tensor_file((fs::path(dir) / blob_name(i, "gt_masks")).string(),
                          c.gt_masks.to(torch::kFloat32));
        write_tensor_file((fs::path(dir) / blob_name(i, "gt_positions")).string(), c.gt_positions);
        write_tensor_file((fs::path(dir) / blob_name(i, "gt_velocities")).string(),
                          c.gt_velocities);
    }
    std::ofstream out(manifest_path);
    if (!out) {
        throw std::runtime_error("write_corpus: cannot write " + manifest_path.string());
    }
    out << manifest_to_json(m).dump(2) << "\n";
    return m;
}

CorpusManifest read_manifest(const std::string& dir) {
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) {
        throw std::runtime_error("read_corpus: no manifest in " + dir);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("read_corpus: malformed manifest: " + std::string(e.what()));
    }
    CorpusManifest m;
    m.format_version = j.at("format_version").get<uint32_t>();
    m.clip_count = j.at("clip_count").get<int64_t>();
    m.num_objects = j.at("num_objects").get<int64_t>();
    m.image_size = j.at("image_size").get<int64_t>();
    m.num_frames = j.at("num_frames").get<int64_t>();
    m.dtype = j.at("dtype").get<std::string>();
    m.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    if (j.contains("config_hash")) m.config_hash = j["config_hash"].get<std::string>();
    return m;
}

std::vector<VideoClip> read_corpus(const std::string& dir) {
    const CorpusManifest m = read_manifest(dir);
    if (m.format_version != kCorpusFormatVersion) {
        throw std::runtime_error("read_corpus: unsupported corpus format version " +
                                 std::to_string(m.format_version));
    }
    if (m.dtype != "f32") {
        throw std::runtime_error("read_corpus: unsupported dtype " + m.dtype);
    }
    std::vector<VideoClip> clips;
    clips.reserve(static_cast<size_t>(m.clip_count));
    for (int64_t i = 0; i < m.clip_count; ++i) {
        const std::string clip_id = "clip " + std::to_string(i);
        VideoClip c;
        for (const char* field : kFields) {
            const fs::path p = fs::path(dir) / blob_name(i, field);
            if (!fs::exists(p)) {
                throw std::runtime_error("read_corpus: " + clip_id + ": missing blob " +
                                         p.filename().string());
            }
            torch::Tensor t;
            {
                std::ifstream in(p, std::ios::binary);
                t = read_tensor(in, "read_corpus: " + clip_id + " (" + p.filename().string() + ")");
            }
            if (std::string(field) == "frames") c.frames = t;
            else if (std::string(field) == "gt_masks") c.gt_masks = t.to(torch::kInt32);
            else if (std::string(field) == "gt_positions") c.gt_positions = t;
            else c.gt_velocities = t;
        }
        if (c.frames.sizes() != torch::IntArrayRef({m.num_frames, m.image_size, m.image_size, 3})) {
            throw std::runtime_error("read_corpus: " + clip_id +
                                     ": frame shape does not match manifest");
        }
        if (c.gt_positions.size(1) != m.num_objects) {
            throw std::runtime_error("read_corpus: " + clip_id +
                                     ": object count does not match manifest");
        }
        c.seed = m.seeds[static_cast<size_t>(i)];
        try {
            c.validate();
        } catch (const std::exception& e) {
            throw std::runtime_error("read_corpus: " + clip_id + ": " + e.what());
        }
        clips.push_back(std::move(c));
    }
    return clips;
}

}  // namespace ock
