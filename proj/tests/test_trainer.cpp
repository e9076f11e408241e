// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/error.hpp"
#include "nlfv/synthetic.hpp"
#include "nlfv/trainer.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>

namespace nlfv {
namespace {

DecoderConfig small_decoder(int size, int base = 16) {
    DecoderConfig dc;
    dc.width = size;
    dc.height = size;
    dc.base_channels = base;
    dc.min_channels = 4;
    dc.seed = 3;
    return dc;
}

TEST(L1Loss, ValueAndGradient) {
    Graph graph;
    Tensor pred({1, 1, 2}, {0.5f, 0.0f}, true);
    const Tensor target({1, 1, 2}, {0.25f, 1.0f});
    const Tensor loss = l1_loss(&graph, pred, target);
    EXPECT_FLOAT_EQ(loss.item(), 0.625f);
    graph.backward(loss);
    EXPECT_FLOAT_EQ(pred.grad()[0], 0.5f);
    EXPECT_FLOAT_EQ(pred.grad()[1], -0.5f);
}

TEST(TrainConfig, ValidationAndJson) {
    TrainConfig c;
    c.learning_rate = 3e-4;
    c.epochs = 7;
    c.temporal = false;
    c.kappa = 20.0f;
    c.seed = 99;
    const TrainConfig back = TrainConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    c.learning_rate = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.epochs = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.kappa = -1.0f;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, ZeroParallaxConverges) {
    const LightFieldDataset ds = generate_synthetic(zero_parallax_scene(32, 3));
    const HoldoutSplit split = holdout_split(ds, {});
    TrainConfig tc;
    tc.epochs = 200;
    tc.learning_rate = 1e-3;
    const TrainResult r = train(ds, split, small_decoder(32), tc);
    ASSERT_EQ(r.log.epochs.size(), 200u);
    EXPECT_LT(r.log.epochs.back().loss_total, 0.02);
}

TEST(Train, MovingLayerMakesProgress) {
    const LightFieldDataset ds = generate_synthetic(moving_layer_scene(16, 3, 5));
    const HoldoutSplit split = holdout_split(ds, HoldoutSpec::parse("center-frame"));
    TrainConfig tc;
    tc.epochs = 50;
    tc.learning_rate = 1e-3;
    const TrainResult r = train(ds, split, small_decoder(16), tc);
    EXPECT_LT(r.log.epochs.back().loss_total, 0.5 * r.log.epochs.front().loss_total);
    for (const auto& e : r.log.epochs) {
        EXPECT_NEAR(e.loss_total, e.loss_spatial + e.loss_full, 1e-9);
        EXPECT_GT(e.loss_spatial, 0.0);
    }
}

TEST(Train, DeterministicStepCountAndIsolation) {
    const LightFieldDataset ds = generate_synthetic(moving_layer_scene(8, 3, 3));
    const HoldoutSplit split = holdout_split(ds, HoldoutSpec::parse("center-view"));
    ASSERT_EQ(split.holdout.size(), 3u);
    TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 17;
    const DecoderConfig dc = small_decoder(8, 8);
    const TrainResult a = train(ds, split, dc, tc);
    const TrainResult b = train(ds, split, dc, tc);
    EXPECT_EQ(a.log.adam_steps, 3 * static_cast<std::int64_t>(split.train.size()));
    for (const auto& h : split.holdout) EXPECT_FALSE(a.log.touched.contains(h));
    EXPECT_EQ(a.log.touched.size(), split.train.size());
    ASSERT_EQ(a.log.epochs.size(), b.log.epochs.size());
    for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
        EXPECT_EQ(a.log.epochs[i].loss_total, b.log.epochs[i].loss_total);
        EXPECT_EQ(a.log.epochs[i].loss_spatial, b.log.epochs[i].loss_spatial);
    }
    const auto pa = a.decoder.parameters();
    const auto pb = b.decoder.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        ASSERT_EQ(pa[i].numel(), pb[i].numel());
        EXPECT_EQ(std::memcmp(pa[i].values().data(), pb[i].values().data(), pa[i].numel() * sizeof(float)), 0);
    }
    ASSERT_TRUE(a.log.holdout_mse.has_value());
    EXPECT_GT(*a.log.holdout_mse, 0.0);
}

TEST(Train, DifferentSeedsDiffer) {
    const LightFieldDataset ds = generate_synthetic(two_layer_scene(8, 3));
    const HoldoutSplit split = holdout_split(ds, {});
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = 1;
    const TrainResult a = train(ds, split, small_decoder(8, 8), tc);
    tc.seed = 2;
    const TrainResult b = train(ds, split, small_decoder(8, 8), tc);
    EXPECT_NE(a.log.epochs[0].loss_total, b.log.epochs[0].loss_total);
}

TEST(Train, ZeroEpochsIsInitialization) {
    const LightFieldDataset ds = generate_synthetic(two_layer_scene(8, 3));
    const HoldoutSplit split = holdout_split(ds, {});
    TrainConfig tc;
    tc.epochs = 0;
    const DecoderConfig dc = small_decoder(8, 8);
    const TrainResult r = train(ds, split, dc, tc);
    EXPECT_TRUE(r.log.epochs.empty());
    EXPECT_EQ(r.log.adam_steps, 0);
    const Decoder fresh = Decoder::init(dc);
    const auto pa = r.decoder.parameters();
    const auto pb = fresh.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i)
        EXPECT_EQ(std::memcmp(pa[i].values().data(), pb[i].values().data(), pa[i].numel() * sizeof(float)), 0);
}

TEST(Train, RejectsBadInputs) {
    const LightFieldDataset ds = generate_synthetic(two_layer_scene(8, 3));
    TrainConfig tc;
    tc.epochs = 1;
    EXPECT_THROW(train(ds, holdout_split(ds, {}), small_decoder(16, 8), tc), Error);
    HoldoutSplit empty;
    EXPECT_THROW(train(ds, empty, small_decoder(8, 8), tc), UsageError);
    DecoderConfig color = small_decoder(8, 8);
    color.mode = DecoderMode::Color;
    EXPECT_THROW(train(ds, holdout_split(ds, {}), color, tc), Error);
}

TEST(Train, LogCsvAndCheckpointCadence) {
    testing::TempDir dir;
    const LightFieldDataset ds = generate_synthetic(two_layer_scene(8, 3));
    TrainConfig tc;
    tc.epochs = 2;
    tc.log_path = dir.path() / "log.csv";
    tc.checkpoint_every = 1;
    tc.checkpoint_path = dir.path() / "ck.bin";
    const TrainResult r = train(ds, holdout_split(ds, {}), small_decoder(8, 8), tc);
    const std::string csv = testing::read_file(tc.log_path);
    EXPECT_EQ(csv.rfind("epoch,loss_total,loss_spatial,loss_full,seconds\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_TRUE(std::filesystem::exists(tc.checkpoint_path));
}

TEST(TrainColor, FitsObservations) {
    const LightFieldDataset ds = generate_synthetic(zero_parallax_scene(8, 3));
    DecoderConfig dc = small_decoder(8, 8);
    dc.mode = DecoderMode::Color;
    TrainConfig tc;
    tc.epochs = 30;
    tc.learning_rate = 1e-3;
    const TrainResult r = train_color(ds, holdout_split(ds, {}), dc, tc);
    EXPECT_LT(r.log.epochs.back().loss_total, r.log.epochs.front().loss_total);
}

TEST(Model, CheckpointRoundTripExact) {
    testing::TempDir dir;
    const LightFieldDataset ds = generate_synthetic(two_layer_scene(8, 3));
    Model m{Decoder::init(small_decoder(8, 8)), std::nullopt, "", 0, 0, {}, {}};
    DecoderConfig cc = small_decoder(8, 8);
    cc.mode = DecoderMode::Color;
    m.color = Decoder::init(cc);
    m.scene = ds.scene;
    m.width = 8;
    m.height = 8;
    m.holdout = {{1, 1, 0}};
    m.train_config.kappa = 12.0f;
    save_model(dir.path() / "m.ckpt", m);
    const Model back = load_model(dir.path() / "m.ckpt");
    save_model(dir.path() / "m2.ckpt", back);
    EXPECT_EQ(testing::read_file(dir.path() / "m.ckpt"), testing::read_file(dir.path() / "m2.ckpt"));
    EXPECT_EQ(back.holdout, m.holdout);
    EXPECT_EQ(back.train_config.kappa, 12.0f);
    ASSERT_TRUE(back.color.has_value());
    EXPECT_NO_THROW(back.check_compatible(ds));
}

TEST(Model, ResolutionMismatchIsDescriptive) {
    const LightFieldDataset ds = generate_synthetic(two_layer_scene(16, 3));
    Model m{Decoder::init(small_decoder(8, 8)), std::nullopt, "", 0, 0, {}, {}};
    m.scene = "two_layer";
    m.width = 8;
    m.height = 8;
    try {
        m.check_compatible(ds);
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("8x8"), std::string::npos) << what;
        EXPECT_NE(what.find("16x16"), std::string::npos) << what;
    }
}

} // namespace
} // namespace nlfv
