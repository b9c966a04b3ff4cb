#include "test_support.hpp"

#include <fstream>

#include "ock/checkpoint.hpp"
#include "ock/config.hpp"
#include "ock/trainer.hpp"

using nlohmann::json;

namespace {

ock::EncoderConfig tiny_encoder_config() {
    ock::EncoderConfig ec;
    ec.image_size = 32;
    ec.dec_grid = 16;
    ec.channels = 8;
    ec.feat_dim = 8;
    ec.slot_dim = 12;
    ec.dec_hidden = 16;
    ec.num_slots = 2;
    return ec;
}

}  // namespace

TEST_SUITE("config_ckpt") {

TEST_CASE("default configuration is valid and survives a json round trip") {
    ock::RunConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    json j = ock::to_json(cfg);
    ock::RunConfig back = ock::run_config_from_json(j);
    CHECK(ock::to_json(back).dump() == j.dump());
    CHECK(back.enc_train.steps == cfg.enc_train.steps);
    CHECK(back.predictor.d_model == cfg.predictor.d_model);
}

TEST_CASE("missing keys keep defaults, unknown keys name their path") {
    ock::RunConfig defaults;
    ock::RunConfig sparse = ock::run_config_from_json(json{{"seed", 9}});
    CHECK(sparse.seed == 9);
    CHECK(sparse.corpus_clips == defaults.corpus_clips);
    CHECK(sparse.scene.num_objects == defaults.scene.num_objects);

    CHECK_THROWS_WITH_AS(ock::run_config_from_json(json{{"bogus", 1}}),
                         "config: unknown key 'bogus'", std::invalid_argument);
    CHECK_THROWS_WITH_AS(ock::run_config_from_json(json{{"scene", {{"xyz", 1}}}}),
                         "config: unknown key 'scene.xyz'", std::invalid_argument);
    CHECK_THROWS_WITH_AS(ock::run_config_from_json(json{{"pred_train", {{"alhpa", 0.1}}}}),
                         "config: unknown key 'pred_train.alhpa'", std::invalid_argument);
}

TEST_CASE("mistyped values and inconsistent combinations are configuration errors") {
    CHECK_THROWS_AS(ock::run_config_from_json(json{{"scene", {{"num_objects", "three"}}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(ock::run_config_from_json(json{{"predictor", "joint"}}),
                    std::invalid_argument);

    // Cross-field checks: sizes and dims must agree across sections.
    ock::RunConfig cfg;
    cfg.eval_clips = cfg.corpus_clips;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = ock::RunConfig{};
    cfg.scene.image_size = 32;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = ock::RunConfig{};
    cfg.predictor.slot_dim = 32;
    cfg.predictor.kin_dim = 32;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = ock::RunConfig{};
    cfg.predictor.horizon_H = cfg.scene.num_frames;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("config hash is stable, canonical, and sensitive") {
    ock::RunConfig cfg;
    std::string h = ock::config_hash(cfg);
    CHECK(h.size() == 16);
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(ock::config_hash(cfg) == h);

    // Key insertion order must not matter.
    json a;
    a["x"] = 1;
    a["y"] = 2;
    json b;
    b["y"] = 2;
    b["x"] = 1;
    CHECK(ock::config_hash(a) == ock::config_hash(b));

    ock::RunConfig other;
    other.seed = 1234;
    CHECK(ock::config_hash(other) != h);
}

TEST_CASE("run config file round trip and failure modes") {
    auto dir = ock_test::fresh_dir("config_file");
    ock::RunConfig cfg;
    cfg.seed = 42;
    cfg.scene.num_objects = 3;
    ock::save_run_config((dir / "cfg.json").string(), cfg);

    ock::RunConfig back = ock::load_run_config((dir / "cfg.json").string());
    CHECK(back.seed == 42);
    CHECK(back.scene.num_objects == 3);
    CHECK(ock::config_hash(back) == ock::config_hash(cfg));

    CHECK_THROWS_AS(ock::load_run_config((dir / "absent.json").string()), std::runtime_error);

    std::ofstream bad(dir / "bad.json");
    bad << "{ not json";
    bad.close();
    CHECK_THROWS_AS(ock::load_run_config((dir / "bad.json").string()), std::invalid_argument);
}

TEST_CASE("raw tensor checkpoints round trip with their metadata") {
    auto dir = ock_test::fresh_dir("ckpt_raw");
    const std::string path = (dir / "raw.ckpt").string();

    torch::manual_seed(1);
    torch::Tensor a = torch::randn({3, 4});
    torch::Tensor b = torch::arange(6, torch::kFloat32).reshape({2, 3});
    ock::save_checkpoint(path, {{"alpha", a}, {"beta", b}}, json{{"note", "x"}});

    ock::Checkpoint ck = ock::load_checkpoint(path);
    REQUIRE(ck.tensors.count("alpha") == 1);
    REQUIRE(ck.tensors.count("beta") == 1);
    CHECK(torch::equal(ck.tensors.at("alpha"), a));
    CHECK(torch::equal(ck.tensors.at("beta"), b));
    CHECK(ck.metadata.at("note") == "x");
    CHECK(ck.metadata.at("format_version").get<int>() == ock::kCheckpointFormatVersion);

    SUBCASE("missing file") {
        CHECK_THROWS_AS(ock::load_checkpoint((dir / "gone.ckpt").string()), std::runtime_error);
    }

    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("JUNK", 4);
        f.close();
        CHECK_THROWS_AS(ock::load_checkpoint(path), std::runtime_error);
    }

    SUBCASE("truncation") {
        std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
        CHECK_THROWS_AS(ock::load_checkpoint(path), std::runtime_error);
    }

    SUBCASE("future format version") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        const uint32_t v = ock::kCheckpointFormatVersion + 1;
        f.write(reinterpret_cast<const char*>(&v), sizeof(v));
        f.close();
        CHECK_THROWS_AS(ock::load_checkpoint(path), std::runtime_error);
    }
}

TEST_CASE("module checkpoints restore parameters exactly and reject mismatches") {
    auto dir = ock_test::fresh_dir("ckpt_module");
    const std::string path = (dir / "kin.ckpt").string();

    torch::manual_seed(2);
    ock::Kinematics kin(8, /*hidden=*/4);
    {
        torch::NoGradGuard g;
        for (auto& p : kin->parameters()) p.uniform_(-1, 1);
    }
    ock::save_module_checkpoint(path, *kin, "kin", json{{"hint", 7}});

    ock::Kinematics fresh(8, 4);
    json meta = ock::load_module_checkpoint(path, *fresh, "kin");
    CHECK(meta.at("hint").get<int>() == 7);
    auto want = kin->named_parameters();
    for (auto& p : fresh->named_parameters()) {
        CHECK(torch::equal(p.value(), want[p.key()]));
    }

    SUBCASE("kind mismatch") {
        ock::Kinematics other(8, 4);
        CHECK_THROWS_AS(ock::load_module_checkpoint(path, *other, "encoder"),
                        std::runtime_error);
    }

    SUBCASE("shape mismatch") {
        ock::Kinematics wide(8, /*hidden=*/6);
        CHECK_THROWS_AS(ock::load_module_checkpoint(path, *wide, "kin"), std::runtime_error);
    }

    SUBCASE("wrong module entirely") {
        ock::Predictor pred(ock::PredictorConfig{});
        CHECK_THROWS_AS(ock::load_module_checkpoint(path, *pred, "kin"), std::runtime_error);
    }
}

TEST_CASE("encoder checkpoints reproduce the saved network bit for bit") {
    auto dir = ock_test::fresh_dir("ckpt_encoder");
    const std::string path = (dir / "encoder.ckpt").string();

    torch::manual_seed(3);
    ock::SlotEncoder enc(tiny_encoder_config());
    enc->eval();
    torch::Tensor frames = torch::rand({1, 2, 32, 32, 3});
    torch::Tensor before;
    {
        torch::NoGradGuard g;
        before = enc->encode_video_batch(frames);
    }

    ock::save_encoder_checkpoint(path, enc, json{{"steps", 11}});

    json meta;
    ock::SlotEncoder loaded = ock::load_encoder_checkpoint(path, &meta);
    CHECK(meta.at("steps").get<int>() == 11);
    CHECK(meta.at("kind") == "encoder");
    CHECK(loaded->config().slot_dim == 12);
    CHECK(loaded->config().num_slots == 2);
    {
        torch::NoGradGuard g;
        CHECK(torch::equal(loaded->encode_video_batch(frames), before));
    }

    SUBCASE("a kinematics checkpoint is not an encoder") {
        const std::string other = (dir / "kin.ckpt").string();
        ock::Kinematics kin(8);
        ock::save_module_checkpoint(other, *kin, "kin");
        CHECK_THROWS_AS(ock::load_encoder_checkpoint(other), std::runtime_error);
    }
}

TEST_CASE("predictor checkpoints carry the predictor, the mlp, and lambda") {
    auto dir = ock_test::fresh_dir("ckpt_predictor");
    const std::string path = (dir / "predictor.ckpt").string();

    torch::manual_seed(4);
    ock::PredictorConfig pc;
    pc.layers = 1;
    pc.heads = 2;
    pc.d_model = 16;
    pc.slot_dim = 12;
    pc.kin_dim = 12;
    ock::PredictorBundle bundle{ock::Predictor(pc), ock::Kinematics(12, 24, 0.5)};
    {
        torch::NoGradGuard g;
        for (auto& p : bundle.kin->named_parameters()) {
            if (p.key() == "lambda") p.value().fill_(1.37);
        }
    }

    torch::Tensor slots = torch::randn({1, 3, 2, 12});
    torch::Tensor kins = torch::randn({1, 3, 4, 12});
    torch::Tensor before;
    {
        torch::NoGradGuard g;
        before = bundle.predictor->predict_next(slots, kins);
    }

    ock::save_predictor_checkpoint(path, bundle, json{{"teacher_forcing", false}});

    json meta;
    ock::PredictorBundle loaded = ock::load_predictor_checkpoint(path, &meta);
    CHECK(meta.at("kind") == "predictor");
    CHECK(meta.at("teacher_forcing").get<bool>() == false);
    CHECK(loaded.predictor->config().layers == 1);
    CHECK(loaded.predictor->config().slot_dim == 12);
    CHECK(loaded.kin->lambda().item<float>() == doctest::Approx(1.37f));
    CHECK(loaded.kin->delta() == 0.5);
    CHECK(loaded.kin->hidden() == 24);
    {
        torch::NoGradGuard g;
        CHECK(torch::equal(loaded.predictor->predict_next(slots, kins), before));
    }

    SUBCASE("an empty bundle cannot be saved") {
        ock::PredictorBundle none;
        CHECK_THROWS_AS(
            ock::save_predictor_checkpoint((dir / "none.ckpt").string(), none),
            std::invalid_argument);
    }

    SUBCASE("an encoder checkpoint is not a predictor") {
        const std::string other = (dir / "enc.ckpt").string();
        ock::SlotEncoder enc(tiny_encoder_config());
        ock::save_encoder_checkpoint(other, enc);
        CHECK_THROWS_AS(ock::load_predictor_checkpoint(other), std::runtime_error);
    }
}

}  // TEST_SUITE
