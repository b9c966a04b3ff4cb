#include "test_support.hpp"

#include <cmath>

#include "ock/config.hpp"
#include "ock/kinematics.hpp"
#include "ock/scene.hpp"
#include "ock/slot_encoder.hpp"
#include "ock/trainer.hpp"

namespace {

ock::EncoderConfig tiny_encoder_config() {
    ock::EncoderConfig ec;
    ec.image_size = 32;
    ec.dec_grid = 16;
    ec.channels = 8;
    ec.feat_dim = 8;
    ec.slot_dim = 16;
    ec.dec_hidden = 16;
    return ec;
}

ock::PredictorConfig tiny_predictor_config() {
    ock::PredictorConfig pc;
    pc.layers = 1;
    pc.heads = 2;
    pc.d_model = 16;
    pc.slot_dim = 16;
    pc.kin_dim = 16;
    pc.history_T = 3;
    pc.horizon_H = 2;
    return pc;
}

std::vector<ock::VideoClip> tiny_corpus(int count) {
    ock::SceneConfig sc;
    sc.num_objects = 2;
    sc.image_size = 32;
    sc.num_frames = 8;
    std::vector<ock::VideoClip> clips;
    for (int i = 0; i < count; ++i) {
        sc.seed = 300 + static_cast<uint64_t>(i);
        clips.push_back(ock::simulate_clip(sc));
    }
    return clips;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("object loss is the mean per-slot L2 gap") {
    torch::Tensor gt = torch::zeros({1, 1, 1, 4});
    torch::Tensor pred = torch::tensor({3.0f, 4.0f, 0.0f, 0.0f}).reshape({1, 1, 1, 4});

    CHECK(ock::object_loss(gt, gt).item<double>() == 0.0);
    CHECK(ock::object_loss(pred, gt).item<double>() == doctest::Approx(5.0).epsilon(1e-7));
    CHECK(ock::object_loss(pred, gt, /*squared=*/true).item<double>() ==
          doctest::Approx(25.0).epsilon(1e-7));

    SUBCASE("the plain norm is homogeneous, the squared one is not") {
        const double one = ock::object_loss(pred, gt).item<double>();
        const double two = ock::object_loss(2 * pred, gt).item<double>();
        CHECK(two == doctest::Approx(2 * one).epsilon(1e-6));
        const double sq1 = ock::object_loss(pred, gt, true).item<double>();
        const double sq2 = ock::object_loss(2 * pred, gt, true).item<double>();
        CHECK(sq2 == doctest::Approx(4 * sq1).epsilon(1e-6));
    }

    SUBCASE("slots average, not sum") {
        torch::Tensor many_gt = torch::zeros({1, 2, 3, 4});
        torch::Tensor many = pred.expand({1, 2, 3, 4});
        CHECK(ock::object_loss(many, many_gt).item<double>() ==
              doctest::Approx(5.0).epsilon(1e-6));
    }

    SUBCASE("shape mismatch is rejected") {
        CHECK_THROWS_AS(ock::object_loss(pred, torch::zeros({1, 1, 1, 5})),
                        std::invalid_argument);
    }
}

TEST_CASE("image loss vanishes on the decoder's own output") {
    torch::manual_seed(1);
    ock::SlotEncoder enc(tiny_encoder_config());
    torch::Tensor slots = torch::randn({1, 2, 3, 16});
    auto [alphas, rgb, combined] = enc->decode_batch(slots.reshape({2, 3, 16}));
    (void)alphas;
    (void)rgb;
    torch::Tensor gt = combined.reshape({1, 2, 32, 32, 3});

    CHECK(ock::image_loss(slots, gt, enc).item<double>() == 0.0);
    CHECK(ock::image_loss(slots, torch::rand_like(gt), enc).item<double>() > 0.0);
    CHECK_THROWS_AS(ock::image_loss(slots.squeeze(0), gt, enc), std::invalid_argument);
}

TEST_CASE("total loss composes the two terms") {
    torch::manual_seed(2);
    ock::SlotEncoder enc(tiny_encoder_config());
    torch::Tensor pred = torch::randn({1, 2, 3, 16});
    torch::Tensor gt_slots = torch::randn({1, 2, 3, 16});
    torch::Tensor gt_frames = torch::rand({1, 2, 32, 32, 3});

    ock::LossParts parts = ock::total_loss(pred, gt_slots, gt_frames, enc, 0.25);
    CHECK(parts.total.item<double>() ==
          doctest::Approx(parts.object.item<double>() + 0.25 * parts.image.item<double>())
              .epsilon(1e-10));

    SUBCASE("alpha zero skips the image term") {
        ock::LossParts bare = ock::total_loss(pred, gt_slots, gt_frames, enc, 0.0);
        CHECK(bare.image.item<double>() == 0.0);
        CHECK(bare.total.item<double>() == doctest::Approx(bare.object.item<double>()));
    }
}

TEST_CASE("window kinematics tokens start every window at rest") {
    torch::manual_seed(3);
    ock::Kinematics kin(16);
    torch::Tensor pos = torch::rand({2, 4, 3, 2});

    auto cfg = tiny_predictor_config();
    auto tokens = ock::window_kin_tokens(kin, cfg, pos);
    REQUIRE(tokens.has_value());
    CHECK(tokens->sizes() == torch::IntArrayRef({2, 4, 6, 16}));  // analytical: 2 per object

    // The first timestep's state has zero velocity and acceleration by construction.
    ock::KinState rest = kin->state_from(pos.select(1, 0), std::nullopt, 0);
    torch::Tensor expected = kin->embed_pair(rest, kin->extrapolate(rest));
    CHECK(torch::equal(tokens->select(1, 0), expected));

    SUBCASE("empirical mode embeds one token per object") {
        cfg.kin_mode = ock::KinMode::empirical;
        auto emp = ock::window_kin_tokens(kin, cfg, pos);
        REQUIRE(emp.has_value());
        CHECK(emp->sizes() == torch::IntArrayRef({2, 4, 3, 16}));
        CHECK(torch::equal(emp->select(1, 0), kin->embed(rest)));
    }

    SUBCASE("baseline mode has no tokens") {
        cfg.mode = ock::PredictorMode::baseline;
        CHECK_FALSE(ock::window_kin_tokens(kin, cfg, pos).has_value());
    }

    SUBCASE("positions must be [B,T,N,2]") {
        CHECK_THROWS_AS(ock::window_kin_tokens(kin, cfg, torch::rand({4, 3, 2})),
                        std::invalid_argument);
    }
}

TEST_CASE("unroll feedback switches between model output and observations") {
    torch::manual_seed(4);
    ock::SlotEncoder enc(tiny_encoder_config());
    ock::Kinematics kin(16);
    ock::Predictor pred(tiny_predictor_config());

    const int64_t T = 3, H = 2;
    torch::Tensor slots_obs = torch::randn({1, T + H, 3, 16});
    torch::Tensor pos_obs = torch::rand({1, T + H, 3, 2});

    torch::Tensor ar = ock::unroll(pred, kin, enc, slots_obs, pos_obs, T, H, false);
    torch::Tensor tf = ock::unroll(pred, kin, enc, slots_obs, pos_obs, T, H, true);
    CHECK(ar.sizes() == torch::IntArrayRef({1, H, 3, 16}));

    // Step one sees the same observed window either way; step two diverges because
    // the feedback sources differ.
    CHECK(torch::equal(ar.select(1, 0), tf.select(1, 0)));
    CHECK_FALSE(torch::equal(ar.select(1, 1), tf.select(1, 1)));

    SUBCASE("a single-step horizon makes the two identical") {
        torch::Tensor a1 = ock::unroll(pred, kin, enc, slots_obs, pos_obs, T, 1, false);
        torch::Tensor t1 = ock::unroll(pred, kin, enc, slots_obs, pos_obs, T, 1, true);
        CHECK(torch::equal(a1, t1));
    }

    SUBCASE("zero horizon yields an empty prediction") {
        torch::Tensor none = ock::unroll(pred, kin, enc, slots_obs, pos_obs, T, 0, false);
        CHECK(none.sizes() == torch::IntArrayRef({1, 0, 3, 16}));
    }

    SUBCASE("guards") {
        CHECK_THROWS_AS(ock::unroll(pred, kin, enc, slots_obs.squeeze(0), pos_obs, T, H, false),
                        std::invalid_argument);
        CHECK_THROWS_AS(ock::unroll(pred, kin, enc, slots_obs, pos_obs, 1, H, false),
                        std::invalid_argument);
        CHECK_THROWS_AS(
            ock::unroll(pred, kin, enc, slots_obs.slice(1, 0, 2), pos_obs.slice(1, 0, 2), T, H,
                        false),
            std::invalid_argument);
        // Teacher forcing needs observations covering the whole horizon.
        CHECK_THROWS_AS(
            ock::unroll(pred, kin, enc, slots_obs.slice(1, 0, T + 1), pos_obs.slice(1, 0, T + 1),
                        T, H, true),
            std::invalid_argument);
    }
}

TEST_CASE("train log rows survive the csv round trip") {
    auto dir = ock_test::fresh_dir("train_log");
    const std::string path = (dir / "log.csv").string();
    std::vector<ock::TrainLogRow> rows = {{0, 1.25, 0.5, 1.375, 10.5},
                                          {20, 0.03125, 0.015625, 0.03515625, 300.25},
                                          {39, 1e-5, 2.5e-6, 1.0625e-5, 612.125}};
    ock::write_train_log(path, rows);
    auto back = ock::read_train_log(path);
    REQUIRE(back.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].step == rows[i].step);
        CHECK(back[i].l_object == doctest::Approx(rows[i].l_object).epsilon(1e-7));
        CHECK(back[i].l_image == doctest::Approx(rows[i].l_image).epsilon(1e-7));
        CHECK(back[i].l_total == doctest::Approx(rows[i].l_total).epsilon(1e-7));
        CHECK(back[i].wall_ms == doctest::Approx(rows[i].wall_ms).epsilon(1e-6));
    }
    CHECK_THROWS_AS(ock::read_train_log((dir / "absent.csv").string()), std::runtime_error);
}

TEST_CASE("encoder training is reproducible and logs its schedule") {
    auto clips = tiny_corpus(2);
    ock::TrainConfig cfg;
    cfg.steps = 6;
    cfg.batch_size = 2;
    cfg.lr = 1e-3;
    cfg.seed = 11;
    cfg.log_every = 2;

    std::vector<ock::TrainLogRow> log1, log2;
    ock::SlotEncoder a = ock::train_encoder(clips, tiny_encoder_config(), cfg, &log1);
    ock::SlotEncoder b = ock::train_encoder(clips, tiny_encoder_config(), cfg, &log2);

    // steps 0,2,4 on the cadence plus the final step
    REQUIRE(log1.size() == 4);
    CHECK(log1.back().step == 5);
    for (const auto& row : log1) CHECK(std::isfinite(row.l_total));
    REQUIRE(log2.size() == log1.size());
    for (size_t i = 0; i < log1.size(); ++i) {
        CHECK(log1[i].l_total == log2[i].l_total);  // bit-identical runs
    }

    auto pa = a->named_parameters();
    for (auto& p : b->named_parameters()) {
        CHECK(torch::equal(p.value(), pa[p.key()]));
    }

    SUBCASE("an empty corpus is rejected") {
        std::vector<ock::VideoClip> none;
        CHECK_THROWS_AS(ock::train_encoder(none, tiny_encoder_config(), cfg),
                        std::invalid_argument);
    }
}

TEST_CASE("a runaway learning rate aborts with the failing step") {
    auto clips = tiny_corpus(1);
    ock::TrainConfig cfg;
    cfg.steps = 5;
    cfg.batch_size = 1;
    cfg.lr = 1e30;
    cfg.seed = 12;

    CHECK_THROWS_AS(ock::train_encoder(clips, tiny_encoder_config(), cfg), std::runtime_error);

    ock::SlotEncoder enc(tiny_encoder_config());
    CHECK_THROWS_AS(ock::train_predictor(clips, enc, tiny_predictor_config(), cfg),
                    std::runtime_error);
}

TEST_CASE("predictor training leaves the encoder untouched and reduces the loss") {
    auto clips = tiny_corpus(2);
    ock::TrainConfig enc_cfg;
    enc_cfg.steps = 2;
    enc_cfg.batch_size = 2;
    enc_cfg.lr = 1e-3;
    enc_cfg.seed = 13;
    ock::SlotEncoder enc = ock::train_encoder(clips, tiny_encoder_config(), enc_cfg);

    std::vector<torch::Tensor> frozen;
    for (auto& p : enc->parameters()) frozen.push_back(p.clone());

    ock::TrainConfig cfg;
    cfg.steps = 25;
    cfg.batch_size = 2;
    cfg.lr = 3e-3;
    cfg.seed = 14;
    cfg.alpha = 0.0;
    cfg.log_every = 1;

    std::vector<ock::TrainLogRow> log;
    ock::PredictorBundle bundle = ock::train_predictor(clips, enc, tiny_predictor_config(), cfg,
                                                       &log);
    REQUIRE_FALSE(bundle.predictor.is_empty());
    REQUIRE_FALSE(bundle.kin.is_empty());
    REQUIRE(log.size() == 25);

    auto now = enc->parameters();
    REQUIRE(now.size() == frozen.size());
    for (size_t i = 0; i < now.size(); ++i) {
        CHECK(torch::equal(now[i], frozen[i]));
    }
    for (auto& p : enc->parameters()) CHECK(p.requires_grad());

    for (const auto& row : log) CHECK(std::isfinite(row.l_total));
    const double early = (log[0].l_total + log[1].l_total + log[2].l_total) / 3;
    const double late =
        (log[log.size() - 1].l_total + log[log.size() - 2].l_total + log[log.size() - 3].l_total) /
        3;
    CHECK(late < early);

    SUBCASE("clips shorter than the unroll are rejected") {
        auto cfg2 = tiny_predictor_config();
        cfg2.history_T = 6;
        cfg2.horizon_H = 8;
        CHECK_THROWS_AS(ock::train_predictor(clips, enc, cfg2, cfg), std::invalid_argument);
    }
}

TEST_CASE("a shared precomputed encoding trains the same predictor as the one-shot path") {
    auto clips = tiny_corpus(2);
    ock::TrainConfig enc_cfg;
    enc_cfg.steps = 2;
    enc_cfg.batch_size = 2;
    enc_cfg.lr = 1e-3;
    enc_cfg.seed = 13;
    ock::SlotEncoder enc = ock::train_encoder(clips, tiny_encoder_config(), enc_cfg);

    ock::TrainConfig cfg;
    cfg.steps = 4;
    cfg.batch_size = 2;
    cfg.lr = 1e-3;
    cfg.seed = 9;
    cfg.alpha = 0.0;

    ock::PredictorBundle one_shot = ock::train_predictor(clips, enc, tiny_predictor_config(), cfg);

    ock::EncodedCorpus codes = ock::encode_corpus(enc, clips);
    REQUIRE(codes.slots.sizes() == torch::IntArrayRef({2, 8, 3, 16}));
    REQUIRE(codes.positions.sizes() == torch::IntArrayRef({2, 8, 3, 2}));
    ock::PredictorBundle reused =
        ock::train_predictor(clips, codes, enc, tiny_predictor_config(), cfg);

    auto pa = one_shot.predictor->parameters(), pb = reused.predictor->parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) CHECK(torch::equal(pa[i], pb[i]));
    CHECK(torch::equal(one_shot.kin->lambda(), reused.kin->lambda()));

    ock::EncodedCorpus short_codes{codes.slots.slice(0, 0, 1), codes.positions.slice(0, 0, 1)};
    CHECK_THROWS_AS(ock::train_predictor(clips, short_codes, enc, tiny_predictor_config(), cfg),
                    std::invalid_argument);
}

TEST_CASE("training configuration is validated up front") {
    auto broken = [](auto mutate) {
        ock::TrainConfig cfg;
        mutate(cfg);
        return cfg;
    };
    CHECK_THROWS_AS(broken([](auto& c) { c.lr = 0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(broken([](auto& c) { c.steps = 0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(broken([](auto& c) { c.batch_size = 0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(broken([](auto& c) { c.alpha = -0.1; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(broken([](auto& c) { c.grad_clip = 0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(broken([](auto& c) { c.log_every = 0; }).validate(), std::invalid_argument);
    CHECK_NOTHROW(ock::TrainConfig{}.validate());
}

}  // TEST_SUITE
