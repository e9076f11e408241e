// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/service.hpp"

#include "nlfv/error.hpp"
#include "nlfv/image.hpp"

#include <httplib.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <optional>

namespace nlfv {
namespace {

constexpr const char* kPpmType = "application/x-portable-pixmap";

ServiceResponse error_response(int status, const std::string& message) {
    ServiceResponse r;
    r.status = status;
    r.content_type = "application/json";
    r.body = nlohmann::json{{"error", message}}.dump();
    return r;
}

std::optional<std::string> param(const std::multimap<std::string, std::string>& params, const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<double> parse_unit(const std::string& text) {
    double value = 0.0;
    const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
    if (result.ec != std::errc() || result.ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

// Releases an in-flight slot on scope exit.
class SlotGuard {
  public:
    explicit SlotGuard(std::atomic<int>& counter) : counter_(counter) {}
    ~SlotGuard() { counter_.fetch_sub(1); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

  private:
    std::atomic<int>& counter_;
};

} // namespace

struct FrameService::Server {
    httplib::Server http;
};

void ServiceConfig::validate() const {
    if (max_concurrent < 1) {
        throw ConfigError("max concurrent renders must be >= 1");
    }
    if (port < 0 || port > 65535) {
        throw ConfigError("port must lie in [0, 65535]");
    }
}

FrameService::FrameService(const LightFieldDataset& dataset, const Model& model, ServiceConfig config)
    : dataset_(&dataset), model_(&model), config_(std::move(config)), views_(dataset, model.holdout),
      geometry_(model.geometry), server_(std::make_unique<Server>()) {
    config_.validate();
    model.check_compatible(dataset);
    context_.views = &views_;
    context_.geometry = &geometry_;
    context_.color_decoder = model.color ? &*model.color : nullptr;
    context_.kappa = model.train_config.kappa;
    context_.max_spatial_neighbors = model.train_config.max_spatial_neighbors;
    if (config_.default_mode.kind == RenderModeKind::NoWarp && !model.color) {
        throw ConfigError("default mode no-warp needs a checkpoint with a color decoder");
    }

    auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
        std::multimap<std::string, std::string> params(req.params.begin(), req.params.end());
        const ServiceResponse r = handle(req.path, params);
        res.status = r.status;
        for (const auto& [k, v] : r.headers) {
            res.set_header(k, v);
        }
        res.set_content(r.body, r.content_type);
    };
    server_->http.Get(R"(/.*)", adapt);
}

FrameService::~FrameService() { stop(); }

std::vector<std::string> FrameService::modes() const {
    std::vector<std::string> out{"full", "no-occlusion"};
    if (model_->color) {
        out.push_back("no-warp");
    }
    out.push_back("blend");
    out.push_back("down-up");
    return out;
}

nlohmann::json FrameService::meta() const {
    return {{"grid", {dataset_->grid_m, dataset_->grid_n}},
            {"frames", dataset_->frames},
            {"size", {dataset_->width, dataset_->height}},
            {"modes", modes()},
            {"scene", dataset_->scene}};
}

ServiceResponse FrameService::handle(const std::string& path,
                                     const std::multimap<std::string, std::string>& params) {
    ServiceResponse r;
    if (path == "/meta") {
        r.content_type = "application/json";
        r.body = meta().dump();
    } else if (path == "/frame") {
        r = frame(params);
    } else {
        r = error_response(404, "unknown path '" + path + "' (endpoints: /meta, /frame)");
    }
    r.headers["Access-Control-Allow-Origin"] = "*";
    return r;
}

ServiceResponse FrameService::frame(const std::multimap<std::string, std::string>& params) {
    LFCoordinate x;
    for (const char* key : {"u", "v", "t"}) {
        const auto text = param(params, key);
        if (!text) {
            return error_response(400, std::string("missing parameter '") + key + "'");
        }
        const auto value = parse_unit(*text);
        if (!value) {
            return error_response(400, std::string("parameter '") + key + "' is not a number: '" + *text + "'");
        }
        if (*value < 0.0 || *value > 1.0) {
            return error_response(400, std::string("parameter '") + key + "' = " + *text +
                                           " lies outside [0,1] (interpolation only)");
        }
        (key[0] == 'u' ? x.u : key[0] == 'v' ? x.v : x.t) = *value;
    }
    RenderMode mode = config_.default_mode;
    if (const auto text = param(params, "mode")) {
        try {
            mode = RenderMode::parse(*text);
        } catch (const UsageError& e) {
            return error_response(400, e.what());
        }
        if (mode.kind == RenderModeKind::NoWarp && !model_->color) {
            return error_response(400, "mode 'no-warp' needs a checkpoint with a color decoder");
        }
    }

    if (in_flight_.fetch_add(1) >= config_.max_concurrent) {
        in_flight_.fetch_sub(1);
        return error_response(503, "too many concurrent renders");
    }
    SlotGuard slot(in_flight_);
    const auto start = std::chrono::steady_clock::now();
    Image image;
    try {
        image = render(context_, x, mode);
    } catch (const UsageError& e) {
        return error_response(400, e.what());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
    const double millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    ServiceResponse r;
    r.content_type = kPpmType;
    r.body = encode_ppm(image);
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), millis, std::chars_format::fixed, 3);
    r.headers["X-Render-Millis"] = std::string(buffer, result.ptr);
    r.headers["Access-Control-Expose-Headers"] = "X-Render-Millis";
    return r;
}

int FrameService::bind() {
    if (config_.port == 0) {
        const int port = server_->http.bind_to_any_port(config_.host);
        if (port < 0) {
            throw Error("cannot bind " + config_.host);
        }
        return port;
    }
    if (!server_->http.bind_to_port(config_.host, config_.port)) {
        throw Error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    return config_.port;
}

void FrameService::listen() { server_->http.listen_after_bind(); }

void FrameService::stop() {
    if (server_) {
        server_->http.stop();
    }
}

} // namespace nlfv
