// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nlfv/dataset.hpp"
#include "nlfv/pipeline.hpp"
#include "nlfv/trainer.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace nlfv {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    /// 0 binds an ephemeral port.
    int port = 8080;
    int max_concurrent = 4;
    RenderMode default_mode;

    void validate() const;
};

struct ServiceResponse {
    int status = 200;
    std::string content_type;
    std::string body;
    std::map<std::string, std::string> headers;
};

/// HTTP frame server over one dataset and one trained model. Weights and
/// observations are shared read-only; each request renders into private
/// buffers.
class FrameService {
  public:
    FrameService(const LightFieldDataset& dataset, const Model& model, ServiceConfig config);
    ~FrameService();
    FrameService(const FrameService&) = delete;
    FrameService& operator=(const FrameService&) = delete;

    nlohmann::json meta() const;
    std::vector<std::string> modes() const;

    /// Transport-free request handling, used by the HTTP layer.
    ServiceResponse handle(const std::string& path, const std::multimap<std::string, std::string>& params);

    /// Binds the listening socket and returns the bound port.
    int bind();
    /// Serves until stop(). Requires bind().
    void listen();
    void stop();

    const RenderContext& context() const { return context_; }

  private:
    ServiceResponse frame(const std::multimap<std::string, std::string>& params);

    const LightFieldDataset* dataset_;
    const Model* model_;
    ServiceConfig config_;
    ViewSet views_;
    DecoderGeometry geometry_;
    RenderContext context_;
    std::atomic<int> in_flight_{0};

    struct Server;
    std::unique_ptr<Server> server_;
};

} // namespace nlfv
