#pragma once

#include <string>
#include <vector>

#include "ock/scene.hpp"

namespace ock {

inline constexpr uint32_t kCorpusFormatVersion = 1;

struct CorpusManifest {
    uint32_t format_version = kCorpusFormatVersion;
    int64_t clip_count = 0;
    int64_t num_objects = 0;
    int64_t image_size = 0;
    int64_t num_frames = 0;
    std::string dtype = "f32";
    std::vector<uint64_t> seeds;
    std::string config_hash;  // optional; set by the CLI
};

// Writes `manifest.json` plus one `clip_<idx>_<field>.bin` blob per tensor
// field. Refuses to overwrite a directory holding a corpus with a different
// format version. Returns the manifest that was written.
CorpusManifest write_corpus(const std::vector<VideoClip>& clips, const std::string& dir,
                            const std::string& config_hash = "");

CorpusManifest read_manifest(const std::string& dir);

// Loads all clips in manifest order, validating shapes against the manifest
// and VideoClip invariants. Errors name the offending clip.
std::vector<VideoClip> read_corpus(const std::string& dir);

}  // namespace ock
