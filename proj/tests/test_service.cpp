// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/error.hpp"
#include "nlfv/service.hpp"
#include "nlfv/synthetic.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <latch>
#include <random>
#include <thread>

namespace nlfv {
namespace {

DecoderConfig decoder_config(int size, int base) {
    DecoderConfig dc;
    dc.width = size;
    dc.height = size;
    dc.base_channels = base;
    dc.seed = 6;
    return dc;
}

struct Scene {
    LightFieldDataset ds;
    Model model;

    explicit Scene(int size = 16, int base = 16)
        : ds(generate_synthetic(moving_layer_scene(size, 3, 3))),
          model{Decoder::init(decoder_config(size, base)), std::nullopt, "", 0, 0, {}, {}} {
        model.scene = ds.scene;
        model.width = size;
        model.height = size;
        model.holdout = {{1, 1, 1}};
    }
};

using Params = std::multimap<std::string, std::string>;

TEST(Service, Meta) {
    Scene s;
    FrameService svc(s.ds, s.model, {});
    const ServiceResponse r = svc.handle("/meta", {});
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.content_type, "application/json");
    const auto j = nlohmann::json::parse(r.body);
    EXPECT_EQ(j.at("grid"), nlohmann::json({3, 3}));
    EXPECT_EQ(j.at("frames"), 3);
    EXPECT_EQ(j.at("size"), nlohmann::json({16, 16}));
    EXPECT_EQ(j.at("scene"), s.ds.scene);
    EXPECT_EQ(j.at("modes"), nlohmann::json({"full", "no-occlusion", "blend", "down-up"}));
    EXPECT_EQ(r.headers.at("Access-Control-Allow-Origin"), "*");
}

TEST(Service, FrameMatchesDirectRender) {
    Scene s;
    FrameService svc(s.ds, s.model, {});
    const ServiceResponse r = svc.handle("/frame", Params{{"u", "0.25"}, {"v", "0.5"}, {"t", "0.3"}});
    ASSERT_EQ(r.status, 200) << r.body;
    EXPECT_EQ(r.body.rfind("P6", 0), 0u);
    EXPECT_TRUE(r.headers.contains("X-Render-Millis"));
    EXPECT_EQ(r.body, encode_ppm(render(svc.context(), {0.25, 0.5, 0.3}, RenderMode{})));
    const ServiceResponse b = svc.handle("/frame", Params{{"u", "0.25"}, {"v", "0.5"}, {"t", "0.3"}, {"mode", "blend"}});
    ASSERT_EQ(b.status, 200);
    EXPECT_EQ(b.body, encode_ppm(blend_views(*svc.context().views, {0.25, 0.5, 0.3})));
}

TEST(Service, HoldoutIsHidden) {
    Scene s;
    FrameService svc(s.ds, s.model, {});
    EXPECT_FALSE(svc.context().views->available({1, 1, 1}));
    const ServiceResponse r = svc.handle("/frame", Params{{"u", "0.5"}, {"v", "0.5"}, {"t", "0.5"}, {"mode", "blend"}});
    ASSERT_EQ(r.status, 200);
    EXPECT_NE(r.body, encode_ppm(s.ds.image({1, 1, 1})));
}

TEST(Service, BadRequests) {
    Scene s;
    FrameService svc(s.ds, s.model, {});
    EXPECT_EQ(svc.handle("/nope", {}).status, 404);
    EXPECT_EQ(svc.handle("/frame/extra", {}).status, 404);
    const ServiceResponse out = svc.handle("/frame", Params{{"u", "1.5"}, {"v", "0.5"}, {"t", "0"}});
    EXPECT_EQ(out.status, 400);
    EXPECT_NE(out.body.find("interpolation only"), std::string::npos);
    EXPECT_EQ(out.headers.at("Access-Control-Allow-Origin"), "*");
    EXPECT_EQ(svc.handle("/frame", Params{{"u", "0.5"}, {"v", "0.5"}}).status, 400);
    EXPECT_EQ(svc.handle("/frame", Params{{"u", "abc"}, {"v", "0.5"}, {"t", "0"}}).status, 400);
    EXPECT_EQ(svc.handle("/frame", Params{{"u", "nan"}, {"v", "0.5"}, {"t", "0"}}).status, 400);
    EXPECT_EQ(svc.handle("/frame", Params{{"u", "0.5"}, {"v", "0.5"}, {"t", "0"}, {"mode", "x"}}).status, 400);
    EXPECT_EQ(svc.handle("/frame", Params{{"u", "0.5"}, {"v", "0.5"}, {"t", "0"}, {"mode", "no-warp"}}).status, 400);
}

TEST(Service, ConfigValidation) {
    ServiceConfig c;
    c.max_concurrent = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = ServiceConfig{};
    c.port = 70000;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Service, OverCapacityGives503) {
    Scene s(32, 64);
    ServiceConfig config;
    config.max_concurrent = 1;
    FrameService svc(s.ds, s.model, config);
    constexpr int kThreads = 6;
    std::latch start(kThreads);
    std::vector<int> status(kThreads);
    std::vector<std::thread> threads;
    for (int i = 0; i < kThreads; ++i) {
        threads.emplace_back([&, i] {
            start.arrive_and_wait();
            status[i] = svc.handle("/frame", Params{{"u", "0.3"}, {"v", "0.3"}, {"t", "0.3"}}).status;
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_GE(std::count(status.begin(), status.end(), 200), 1);
    EXPECT_GE(std::count(status.begin(), status.end(), 503), 1);
    EXPECT_EQ(std::count(status.begin(), status.end(), 200) + std::count(status.begin(), status.end(), 503), kThreads);
}

TEST(Service, HttpConcurrentIndependentFrames) {
    Scene s;
    ServiceConfig config;
    config.port = 0;
    config.max_concurrent = 8;
    FrameService svc(s.ds, s.model, config);
    const int port = svc.bind();
    std::thread server([&] { svc.listen(); });

    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<LFCoordinate> coords(6);
    for (auto& c : coords) c = {dist(rng), dist(rng), dist(rng)};
    std::vector<std::string> expected;
    for (const auto& c : coords) expected.push_back(encode_ppm(render(svc.context(), c, RenderMode{})));

    auto path_for = [](const LFCoordinate& c) {
        std::ostringstream q;
        q.precision(17);
        q << "/frame?u=" << c.u << "&v=" << c.v << "&t=" << c.t;
        return q.str();
    };
    std::vector<std::string> bodies(coords.size());
    std::vector<int> status(coords.size());
    std::vector<std::thread> clients;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        clients.emplace_back([&, i] {
            httplib::Client client("127.0.0.1", port);
            if (auto res = client.Get(path_for(coords[i]))) {
                status[i] = res->status;
                bodies[i] = res->body;
            }
        });
    }
    for (auto& c : clients) c.join();
    for (std::size_t i = 0; i < coords.size(); ++i) {
        EXPECT_EQ(status[i], 200);
        EXPECT_EQ(bodies[i], expected[i]) << i;
    }

    httplib::Client client("127.0.0.1", port);
    auto meta = client.Get("/meta");
    ASSERT_TRUE(meta);
    EXPECT_EQ(meta->status, 200);
    EXPECT_EQ(meta->get_header_value("Access-Control-Allow-Origin"), "*");
    auto bad = client.Get("/frame?u=1.5&v=0&t=0");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    auto missing = client.Get("/frames");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);

    svc.stop();
    server.join();
}

} // namespace
} // namespace nlfv
