#include "test_support.hpp"

#include "ock/scene.hpp"
#include "ock/slot_encoder.hpp"
#include "ock/trainer.hpp"

namespace {

ock::EncoderConfig small_config() {
    ock::EncoderConfig ec;
    ec.image_size = 32;
    ec.dec_grid = 16;
    ec.channels = 8;
    ec.feat_dim = 8;
    ec.slot_dim = 16;
    ec.dec_hidden = 16;
    return ec;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("feature grid geometry follows the stride schedule") {
    auto cfg = small_config();
    CHECK(cfg.grid_side() == 8);  // 32 / (2*2*1*1)

    ock::SlotEncoder enc(cfg);
    ock::FeatureGrid grid = enc->encode_features(torch::rand({32, 32, 3}));
    CHECK(grid.features.sizes() == torch::IntArrayRef({64, 8}));
    CHECK(grid.grid_shape.first == 8);
    CHECK(grid.grid_shape.second == 8);

    SUBCASE("unit strides keep full resolution") {
        ock::EncoderConfig full = small_config();
        full.image_size = 16;
        full.dec_grid = 8;
        full.strides = {1, 1, 1, 1};
        CHECK(full.grid_side() == 16);
        ock::SlotEncoder dense(full);
        ock::FeatureGrid g = dense->encode_features(torch::rand({16, 16, 3}));
        CHECK(g.features.sizes() == torch::IntArrayRef({256, 8}));
    }
}

TEST_CASE("config validation catches geometry mistakes") {
    auto broken = [](auto mutate) {
        ock::EncoderConfig cfg;
        mutate(cfg);
        return cfg;
    };
    CHECK_THROWS_AS(broken([](auto& c) { c.num_slots = 0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(broken([](auto& c) { c.kernel = 4; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(broken([](auto& c) { c.strides = {3, 2, 1, 1}; }).validate(),
                    std::invalid_argument);
    CHECK_THROWS_AS(broken([](auto& c) { c.dec_grid = 128; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(broken([](auto& c) { c.image_size = 4; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(broken([](auto& c) { c.iters_first = 0; }).validate(), std::invalid_argument);
    CHECK_NOTHROW(ock::EncoderConfig{}.validate());
}

TEST_CASE("malformed frames are rejected") {
    ock::SlotEncoder enc(small_config());
    CHECK_THROWS_AS(enc->encode_features_batch(torch::rand({1, 32, 32, 4})),
                    std::invalid_argument);
    CHECK_THROWS_AS(enc->encode_video_batch(torch::rand({2, 32, 32, 3})), std::invalid_argument);

    torch::Tensor poisoned = torch::rand({1, 32, 32, 3});
    poisoned[0][5][5][0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_WITH_AS(enc->encode_features_batch(poisoned), "encoder: non-finite frame values",
                         std::invalid_argument);
}

TEST_CASE("a blank frame still produces finite slots and masks") {
    ock::SlotEncoder enc(small_config());
    torch::Tensor slots = enc->encode_video_batch(torch::zeros({1, 2, 32, 32, 3}));
    CHECK(slots.sizes() == torch::IntArrayRef({1, 2, 3, 16}));
    CHECK(slots.isfinite().all().item<bool>());

    auto [alphas, rgb, combined] = enc->decode_batch(slots.reshape({2, 3, 16}));
    CHECK(alphas.isfinite().all().item<bool>());
    CHECK(combined.isfinite().all().item<bool>());
    (void)rgb;
}

TEST_CASE("slots compete: attention over slots is a distribution per cell") {
    torch::manual_seed(1);
    ock::SlotEncoder enc(small_config());
    torch::Tensor features = enc->encode_features_batch(torch::rand({2, 32, 32, 3}));
    torch::Tensor slots = enc->initial_slots(2);

    torch::Tensor attn;
    torch::Tensor next = enc->attention_step(slots, features, &attn);
    CHECK(attn.sizes() == torch::IntArrayRef({2, 3, 64}));
    CHECK((attn.sum(1) - 1).abs().max().item<double>() < 1e-6);
    CHECK(next.sizes() == torch::IntArrayRef({2, 3, 16}));
    CHECK(next.isfinite().all().item<bool>());

    SUBCASE("a single slot takes every cell outright") {
        auto cfg = small_config();
        cfg.num_slots = 1;
        ock::SlotEncoder solo(cfg);
        torch::Tensor f = solo->encode_features_batch(torch::rand({1, 32, 32, 3}));
        torch::Tensor a;
        solo->attention_step(solo->initial_slots(1), f, &a);
        CHECK((a - 1).abs().max().item<double>() == 0.0);
    }
}

TEST_CASE("one attention step is equivariant to slot order") {
    torch::manual_seed(2);
    ock::SlotEncoder enc(small_config());
    torch::Tensor features = enc->encode_features_batch(torch::rand({1, 32, 32, 3}));
    torch::Tensor slots = torch::randn({1, 3, 16});
    torch::Tensor perm = torch::tensor({2, 0, 1});

    torch::Tensor direct = enc->attention_step(slots.index_select(1, perm), features);
    torch::Tensor permuted = enc->attention_step(slots, features).index_select(1, perm);
    CHECK((direct - permuted).abs().max().item<double>() < 1e-5);
}

TEST_CASE("video encoding is deterministic and handles a single frame") {
    torch::manual_seed(3);
    ock::SlotEncoder enc(small_config());
    enc->eval();
    torch::Tensor frames = torch::rand({1, 3, 32, 32, 3});

    torch::NoGradGuard guard;
    torch::Tensor a = enc->encode_video_batch(frames);
    torch::Tensor b = enc->encode_video_batch(frames);
    CHECK(torch::equal(a, b));

    torch::Tensor one = enc->encode_video_batch(frames.slice(1, 0, 1));
    CHECK(one.sizes() == torch::IntArrayRef({1, 1, 3, 16}));

    std::vector<ock::SlotSet> sets = enc->encode_video(frames.squeeze(0));
    REQUIRE(sets.size() == 3);
    CHECK(sets[2].timestep == 2);
    CHECK((sets[1].slots - a.select(0, 0).select(0, 1)).abs().max().item<double>() == 0.0);
}

TEST_CASE("decoded masks are normalized and order-insensitive") {
    torch::manual_seed(4);
    ock::SlotEncoder enc(small_config());
    torch::Tensor slots = torch::randn({2, 3, 16});

    auto [alphas, rgb, combined] = enc->decode_batch(slots);
    CHECK(alphas.sizes() == torch::IntArrayRef({2, 3, 32, 32}));
    CHECK(rgb.sizes() == torch::IntArrayRef({2, 3, 32, 32, 3}));
    CHECK(combined.sizes() == torch::IntArrayRef({2, 32, 32, 3}));
    CHECK((alphas.sum(1) - 1).abs().max().item<double>() < 1e-5);
    CHECK(alphas.min().item<double>() >= 0.0);
    CHECK(rgb.min().item<double>() >= 0.0);
    CHECK(rgb.max().item<double>() <= 1.0);
    CHECK(combined.min().item<double>() >= 0.0);
    CHECK(combined.max().item<double>() <= 1.0);

    SUBCASE("the composite image ignores slot order") {
        torch::Tensor perm = torch::tensor({1, 2, 0});
        auto [pa, pr, pc] = enc->decode_batch(slots.index_select(1, perm));
        (void)pa;
        (void)pr;
        CHECK((pc - combined).abs().max().item<double>() < 1e-5);
    }

    SUBCASE("the clip wrapper agrees with the batch") {
        ock::SlotSet set{slots[0], 0};
        auto [masks, comb] = enc->decode_slots(set);
        CHECK((masks.alphas - alphas[0]).abs().max().item<double>() == 0.0);
        CHECK((comb - combined[0]).abs().max().item<double>() == 0.0);
    }

    CHECK_THROWS_AS(enc->decode_batch(slots[0]), std::invalid_argument);
}

TEST_CASE("learned queries start every batch row identically") {
    ock::SlotEncoder enc(small_config());
    torch::Tensor init = enc->initial_slots(4);
    CHECK(init.sizes() == torch::IntArrayRef({4, 3, 16}));
    CHECK(torch::equal(init[0], init[3]));
}

TEST_CASE("a short reconstruction run beats the untrained decoder") {
    ock::SceneConfig sc;
    sc.num_objects = 2;
    sc.image_size = 32;
    sc.num_frames = 8;
    std::vector<ock::VideoClip> clips;
    for (int i = 0; i < 2; ++i) {
        sc.seed = 500 + static_cast<uint64_t>(i);
        clips.push_back(ock::simulate_clip(sc));
    }
    sc.seed = 599;
    ock::VideoClip held_out = ock::simulate_clip(sc);

    ock::TrainConfig cfg;
    cfg.steps = 60;
    cfg.batch_size = 2;
    cfg.lr = 2e-3;
    cfg.seed = 7;
    cfg.log_every = 10;

    auto recon_mse = [&](ock::SlotEncoder& e) {
        torch::NoGradGuard guard;
        torch::Tensor frames = held_out.frames.unsqueeze(0);
        torch::Tensor slots = e->encode_video_batch(frames).squeeze(0);
        auto [alphas, rgb, combined] = e->decode_batch(slots);
        (void)alphas;
        (void)rgb;
        return torch::mse_loss(combined, held_out.frames).item<double>();
    };

    torch::manual_seed(static_cast<int64_t>(cfg.seed));
    ock::SlotEncoder untrained(small_config());
    const double before = recon_mse(untrained);

    std::vector<ock::TrainLogRow> log;
    ock::SlotEncoder trained = ock::train_encoder(clips, small_config(), cfg, &log);
    const double after = recon_mse(trained);

    CHECK(after < before);
    CHECK(log.back().l_total < log.front().l_total);
}

}  // TEST_SUITE
