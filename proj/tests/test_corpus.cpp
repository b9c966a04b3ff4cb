#include "test_support.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "ock/corpus.hpp"
#include "ock/scene.hpp"
#include "ock/tensor_io.hpp"

namespace fs = std::filesystem;
using ock_test::fresh_dir;

namespace {

ock::SceneConfig tiny_scene(uint64_t seed) {
    ock::SceneConfig sc;
    sc.num_objects = 2;
    sc.image_size = 32;
    sc.num_frames = 12;
    sc.seed = seed;
    return sc;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("wall reflection mirrors position and flips velocity") {
    // Crossing the wall by 0.05 lands 0.05 inside it, moving away.
    auto [p, v] = ock::reflect_axis(0.95, 0.1, 0.0, 1.0, 1.0);
    CHECK(p == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(v == doctest::Approx(-0.1).epsilon(1e-12));

    // No wall contact: plain advance.
    auto [p2, v2] = ock::reflect_axis(0.5, 0.1, 0.0, 1.0, 1.0);
    CHECK(p2 == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(v2 == doctest::Approx(0.1).epsilon(1e-12));

    // Restitution scales both the overshoot and the speed.
    auto [p3, v3] = ock::reflect_axis(0.95, 0.1, 0.0, 1.0, 0.5);
    CHECK(p3 == doctest::Approx(1.0 - 0.025).epsilon(1e-12));
    CHECK(v3 == doctest::Approx(-0.05).epsilon(1e-12));
}

TEST_CASE("simulate_clip is bit-deterministic") {
    ock::SceneConfig sc = tiny_scene(42);
    ock::VideoClip a = ock::simulate_clip(sc);
    ock::VideoClip b = ock::simulate_clip(sc);
    CHECK(torch::equal(a.frames, b.frames));
    CHECK(torch::equal(a.gt_masks, b.gt_masks));
    CHECK(torch::equal(a.gt_positions, b.gt_positions));
    CHECK(torch::equal(a.gt_velocities, b.gt_velocities));
}

TEST_CASE("clip tensors satisfy their documented invariants") {
    ock::VideoClip clip = ock::simulate_clip(tiny_scene(7));
    clip.validate();

    CHECK(clip.frames.sizes() == torch::IntArrayRef({12, 32, 32, 3}));
    CHECK(clip.gt_positions.min().item<float>() >= 0.0f);
    CHECK(clip.gt_positions.max().item<float>() <= 1.0f);
    CHECK(clip.frames.min().item<float>() >= 0.0f);
    CHECK(clip.frames.max().item<float>() <= 1.0f);

    // Label image uses exactly {0, 1, 2}.
    torch::Tensor labels = std::get<0>(torch::_unique(clip.gt_masks));
    CHECK(labels.numel() == 3);
    CHECK(labels.min().item<int>() == 0);
    CHECK(labels.max().item<int>() == 2);
}

TEST_CASE("velocity equals position difference away from bounces") {
    ock::VideoClip clip = ock::simulate_clip(tiny_scene(3));
    const int64_t T = clip.num_frames(), N = clip.num_objects();
    auto pos = clip.gt_positions.accessor<float, 3>();
    auto vel = clip.gt_velocities.accessor<float, 3>();
    int checked = 0;
    for (int64_t t = 1; t < T; ++t) {
        for (int64_t n = 0; n < N; ++n) {
            // Sign flip between consecutive velocities marks a wall bounce.
            bool bounced = vel[t][n][0] * vel[t - 1][n][0] < 0 ||
                           vel[t][n][1] * vel[t - 1][n][1] < 0;
            if (bounced) continue;
            for (int d = 0; d < 2; ++d) {
                CHECK(pos[t][n][d] - pos[t - 1][n][d] ==
                      doctest::Approx(vel[t][n][d]).epsilon(1e-5));
            }
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("speed magnitude is conserved under restitution 1") {
    ock::VideoClip clip = ock::simulate_clip(tiny_scene(11));
    torch::Tensor speed = clip.gt_velocities.to(torch::kFloat64).pow(2).sum(-1).sqrt();  // [T,N]
    torch::Tensor first = speed[0];
    CHECK((speed - first).abs().max().item<double>() < 1e-6);
}

TEST_CASE("mask centroids track ground-truth positions within a pixel") {
    ock::VideoClip clip = ock::simulate_clip(tiny_scene(19));
    const int64_t W = clip.image_size();
    for (int64_t t : {int64_t(0), clip.num_frames() / 2, clip.num_frames() - 1}) {
        for (int64_t n = 0; n < clip.num_objects(); ++n) {
            torch::Tensor hit = (clip.gt_masks[t] == static_cast<int>(n + 1));
            REQUIRE(hit.any().item<bool>());
            torch::Tensor idx = hit.nonzero().to(torch::kFloat64);  // rows (i,j)
            double cy = (idx.select(1, 0).mean().item<double>() + 0.5) / static_cast<double>(W);
            double cx = (idx.select(1, 1).mean().item<double>() + 0.5) / static_cast<double>(W);
            double gx = clip.gt_positions[t][n][0].item<double>();
            double gy = clip.gt_positions[t][n][1].item<double>();
            CHECK(std::abs(cx - gx) < 1.0 / static_cast<double>(W));
            CHECK(std::abs(cy - gy) < 1.0 / static_cast<double>(W));
        }
    }
}

TEST_CASE("bad scene configs are rejected") {
    ock::SceneConfig sc = tiny_scene(0);
    sc.num_objects = 0;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);

    sc = tiny_scene(0);
    sc.num_frames = 1;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);

    sc = tiny_scene(0);
    sc.image_size = 8;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);

    sc = tiny_scene(0);
    sc.speed_min = 0.08f;
    sc.speed_max = 0.02f;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);

    sc = tiny_scene(0);
    sc.restitution = 0.0f;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
}

TEST_CASE("overcrowded scenes fail with a clear message") {
    ock::SceneConfig sc = tiny_scene(1);
    sc.num_objects = 40;
    sc.radius_min = 0.2f;
    sc.radius_max = 0.25f;
    CHECK_THROWS_WITH_AS(ock::simulate_clip(sc), doctest::Contains("scene too crowded"),
                         std::runtime_error);
}

TEST_CASE("tensor container round-trips bit-exactly") {
    torch::Tensor t = torch::randn({3, 5, 2});
    fs::path file = fresh_dir("tensor_io") / "t.bin";
    ock::write_tensor_file(file.string(), t);
    torch::Tensor back = ock::read_tensor_file(file.string());
    CHECK(torch::equal(t, back));
}

TEST_CASE("tensor container rejects corruption") {
    fs::path dir = fresh_dir("tensor_bad");
    fs::path file = dir / "t.bin";
    ock::write_tensor_file(file.string(), torch::randn({4, 4}));

    SUBCASE("truncated payload") {
        fs::resize_file(file, fs::file_size(file) - 8);
        CHECK_THROWS_AS(ock::read_tensor_file(file.string()), std::runtime_error);
    }
    SUBCASE("bad magic") {
        std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
        f.write("JUNK", 4);
        f.close();
        CHECK_THROWS_AS(ock::read_tensor_file(file.string()), std::runtime_error);
    }
}

TEST_CASE("corpus write/read round-trip preserves every tensor") {
    std::vector<ock::VideoClip> clips;
    for (uint64_t s = 0; s < 3; ++s) clips.push_back(ock::simulate_clip(tiny_scene(s)));
    fs::path dir = fresh_dir("corpus_rt");

    ock::CorpusManifest manifest = ock::write_corpus(clips, dir.string());
    CHECK(manifest.clip_count == 3);
    CHECK(manifest.num_objects == 2);
    CHECK(manifest.image_size == 32);
    CHECK(manifest.num_frames == 12);
    const std::vector<uint64_t> expected_seeds{0, 1, 2};
    CHECK(manifest.seeds == expected_seeds);

    std::vector<ock::VideoClip> back = ock::read_corpus(dir.string());
    REQUIRE(back.size() == clips.size());
    for (size_t i = 0; i < clips.size(); ++i) {
        CHECK(torch::equal(clips[i].frames, back[i].frames));
        CHECK(torch::equal(clips[i].gt_masks, back[i].gt_masks));
        CHECK(torch::equal(clips[i].gt_positions, back[i].gt_positions));
        CHECK(torch::equal(clips[i].gt_velocities, back[i].gt_velocities));
        CHECK(back[i].seed == clips[i].seed);
    }
}

TEST_CASE("corpus errors name the offending clip") {
    std::vector<ock::VideoClip> clips{ock::simulate_clip(tiny_scene(5)),
                                      ock::simulate_clip(tiny_scene(6))};
    fs::path dir = fresh_dir("corpus_err");
    ock::write_corpus(clips, dir.string());

    SUBCASE("missing blob") {
        fs::remove(dir / "clip_0001_frames.bin");
        CHECK_THROWS_WITH_AS(ock::read_corpus(dir.string()), doctest::Contains("1"),
                             std::runtime_error);
    }
    SUBCASE("truncated blob header") {
        fs::resize_file(dir / "clip_0000_frames.bin", 6);
        CHECK_THROWS_WITH_AS(ock::read_corpus(dir.string()), doctest::Contains("0"),
                             std::runtime_error);
    }
    SUBCASE("empty directory") {
        fs::path empty = fresh_dir("corpus_empty");
        CHECK_THROWS_WITH_AS(ock::read_corpus(empty.string()), doctest::Contains("manifest"),
                             std::runtime_error);
    }
}

TEST_CASE("corpus refuses to overwrite a different format version") {
    std::vector<ock::VideoClip> clips{ock::simulate_clip(tiny_scene(9))};
    fs::path dir = fresh_dir("corpus_ver");
    ock::write_corpus(clips, dir.string());

    // Pretend a newer tool wrote this corpus.
    fs::path manifest = dir / "manifest.json";
    nlohmann::json j;
    {
        std::ifstream in(manifest);
        in >> j;
    }
    j["format_version"] = ock::kCorpusFormatVersion + 1;
    {
        std::ofstream out(manifest);
        out << j.dump(2);
    }
    CHECK_THROWS_AS(ock::write_corpus(clips, dir.string()), std::runtime_error);
}

}  // TEST_SUITE
