// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/trainer.hpp"

#include "nlfv/adam.hpp"
#include "nlfv/checkpoint.hpp"
#include "nlfv/error.hpp"
#include "nlfv/metrics.hpp"
#include "nlfv/ops.hpp"
#include "nlfv/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace nlfv {
namespace {

using Clock = std::chrono::steady_clock;

std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

nlohmann::json indices_to_json(const std::set<GridIndex>& indices) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& g : indices) {
        out.push_back({g.i, g.j, g.k});
    }
    return out;
}

std::set<GridIndex> indices_from_json(const nlohmann::json& j) {
    std::set<GridIndex> out;
    for (const auto& e : j) {
        out.insert({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>()});
    }
    return out;
}

void check_decoder_fits(const LightFieldDataset& dataset, const DecoderConfig& config, DecoderMode mode) {
    config.validate();
    if (config.mode != mode) {
        throw ConfigError("decoder mode must be '" + to_string(mode) + "', got '" + to_string(config.mode) + "'");
    }
    if (config.width != dataset.width || config.height != dataset.height) {
        throw ConfigError("decoder output " + std::to_string(config.width) + "x" + std::to_string(config.height) +
                          " does not match dataset " + std::to_string(dataset.width) + "x" +
                          std::to_string(dataset.height));
    }
}

std::optional<double> holdout_error(const LightFieldDataset& dataset, const HoldoutSplit& split,
                                    const Decoder& decoder, const TrainConfig& config) {
    if (split.holdout.empty()) {
        return std::nullopt;
    }
    const ViewSet views(dataset, split.holdout);
    const DecoderGeometry geometry(decoder);
    RenderContext context;
    context.views = &views;
    context.geometry = &geometry;
    context.kappa = config.kappa;
    context.max_spatial_neighbors = config.max_spatial_neighbors;
    const RenderMode mode{config.occlusion ? RenderModeKind::Full : RenderModeKind::NoOcclusion};
    double total = 0.0;
    for (const auto& h : split.holdout) {
        total += mse(render(context, dataset.coordinate(h), mode), dataset.image(h));
    }
    return total / static_cast<double>(split.holdout.size());
}

Model snapshot(const LightFieldDataset& dataset, const HoldoutSplit& split, const Decoder& decoder,
               const TrainConfig& config) {
    return Model{decoder, std::nullopt, dataset.scene, dataset.width, dataset.height, split.holdout, config};
}

// Shared epoch loop. `step` runs one coordinate and returns (total, spatial, full).
template <typename Step>
TrainLog run_epochs(const LightFieldDataset& dataset, const HoldoutSplit& split, const TrainConfig& config,
                    Decoder& decoder, ViewSet& views, const EpochCallback& on_epoch, bool write_checkpoints,
                    Step step) {
    TrainLog log;
    views.set_access_log(&log.touched);
    std::vector<Tensor> params = decoder.parameters();
    AdamState adam = AdamState::for_parameters(params);
    std::mt19937_64 rng(config.seed);
    std::vector<GridIndex> order = split.train;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = Clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        double sum_total = 0.0;
        double sum_spatial = 0.0;
        double sum_full = 0.0;
        for (const auto& index : order) {
            Graph graph;
            Tensor total;
            double spatial = 0.0;
            double full = 0.0;
            try {
                std::tie(total, spatial, full) = step(graph, index);
                if (!std::isfinite(total.item())) {
                    throw NumericFault("non-finite loss");
                }
                graph.backward(total);
            } catch (const NumericFault& e) {
                throw NumericFault(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", observation " +
                                   to_string(index) + ")");
            }
            adam_step(params, adam, config.learning_rate);
            ++log.adam_steps;
            sum_total += total.item();
            sum_spatial += spatial;
            sum_full += full;
        }
        const double n = static_cast<double>(order.size());
        EpochRecord record{epoch, sum_total / n, sum_spatial / n, sum_full / n,
                           std::chrono::duration<double>(Clock::now() - start).count()};
        log.epochs.push_back(record);
        if (!config.log_path.empty()) {
            log.write_csv(config.log_path);
        }
        if (write_checkpoints && config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
            epoch % config.checkpoint_every == 0) {
            save_model(config.checkpoint_path, snapshot(dataset, split, decoder, config));
        }
        if (on_epoch) {
            on_epoch(record);
        }
    }
    views.set_access_log(nullptr);
    if (!config.log_path.empty()) {
        log.write_csv(config.log_path);
    }
    return log;
}

} // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning rate must be > 0");
    }
    if (epochs < 0) {
        throw ConfigError("epochs must be >= 0");
    }
    if (!(lambda_spatial >= 0.0) || !(lambda_full >= 0.0) || !(lambda_spatial > 0.0 || lambda_full > 0.0)) {
        throw ConfigError("loss weights must be >= 0 with at least one > 0");
    }
    if (!(kappa > 0.0f)) {
        throw ConfigError("kappa must be > 0");
    }
    if (checkpoint_every < 0 || max_spatial_neighbors < 0) {
        throw ConfigError("checkpoint cadence and neighbor cap must be >= 0");
    }
}

nlohmann::json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate},
            {"epochs", epochs},
            {"lambda_spatial", lambda_spatial},
            {"lambda_full", lambda_full},
            {"temporal", temporal},
            {"occlusion", occlusion},
            {"kappa", kappa},
            {"seed", seed},
            {"max_spatial_neighbors", max_spatial_neighbors}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.learning_rate = j.at("learning_rate").get<double>();
        c.epochs = j.at("epochs").get<int>();
        c.lambda_spatial = j.at("lambda_spatial").get<double>();
        c.lambda_full = j.at("lambda_full").get<double>();
        c.temporal = j.at("temporal").get<bool>();
        c.occlusion = j.at("occlusion").get<bool>();
        c.kappa = j.at("kappa").get<float>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.max_spatial_neighbors = j.value("max_spatial_neighbors", 0);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("malformed train config: ") + e.what());
    }
    return c;
}

std::string TrainLog::to_csv() const {
    std::ostringstream out;
    out << "epoch,loss_total,loss_spatial,loss_full,seconds\n";
    for (const auto& r : epochs) {
        out << r.epoch << ',' << format_double(r.loss_total) << ',' << format_double(r.loss_spatial) << ','
            << format_double(r.loss_full) << ',' << format_double(r.seconds) << '\n';
    }
    return out.str();
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write training log " + path.string());
    }
    out << to_csv();
}

Tensor l1_loss(Graph* graph, const Tensor& prediction, const Tensor& target) {
    if (prediction.shape() != target.shape()) {
        throw UsageError("l1_loss: shapes " + shape_string(prediction.shape()) + " and " +
                         shape_string(target.shape()) + " differ");
    }
    return ops::reduce_mean_abs(graph, ops::subtract(graph, prediction, target));
}

void Model::check_compatible(const LightFieldDataset& dataset) const {
    if (width != dataset.width || height != dataset.height) {
        throw LoadError("checkpoint was trained at " + std::to_string(width) + "x" + std::to_string(height) +
                        " but dataset '" + dataset.scene + "' is " + std::to_string(dataset.width) + "x" +
                        std::to_string(dataset.height));
    }
    for (const auto& h : holdout) {
        if (!dataset.in_grid(h)) {
            throw LoadError("checkpoint holdout " + to_string(h) + " lies outside the dataset grid");
        }
    }
}

Checkpoint model_to_checkpoint(const Model& model) {
    Checkpoint ck;
    ck.config = {{"format", "nlfv-model"},
                 {"geometry", model.geometry.config().to_json()},
                 {"color", model.color ? model.color->config().to_json() : nlohmann::json(nullptr)},
                 {"scene", model.scene},
                 {"size", {model.width, model.height}},
                 {"holdout", indices_to_json(model.holdout)},
                 {"train", model.train_config.to_json()}};
    for (const auto& p : model.geometry.named_parameters()) {
        ck.tensors.push_back({"geom." + p.name, p.tensor});
    }
    if (model.color) {
        for (const auto& p : model.color->named_parameters()) {
            ck.tensors.push_back({"color." + p.name, p.tensor});
        }
    }
    return ck;
}

Model model_from_checkpoint(const Checkpoint& checkpoint) {
    const auto& cfg = checkpoint.config;
    if (cfg.value("format", std::string()) != "nlfv-model") {
        throw LoadError("checkpoint does not hold an nlfv model");
    }
    auto take = [&](const std::string& prefix) {
        std::vector<NamedTensor> out;
        for (const auto& t : checkpoint.tensors) {
            if (t.name.starts_with(prefix)) {
                out.push_back({t.name.substr(prefix.size()), t.tensor});
            }
        }
        return out;
    };
    try {
        const DecoderConfig geometry_config = DecoderConfig::from_json(cfg.at("geometry"));
        Model model{Decoder::from_tensors(geometry_config, take("geom.")),
                    std::nullopt,
                    cfg.at("scene").get<std::string>(),
                    cfg.at("size").at(0).get<int>(),
                    cfg.at("size").at(1).get<int>(),
                    indices_from_json(cfg.at("holdout")),
                    TrainConfig::from_json(cfg.at("train"))};
        if (!cfg.at("color").is_null()) {
            model.color = Decoder::from_tensors(DecoderConfig::from_json(cfg.at("color")), take("color."));
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("malformed model checkpoint: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const Model& model) {
    save_checkpoint(path, model_to_checkpoint(model));
}

Model load_model(const std::filesystem::path& path) { return model_from_checkpoint(load_checkpoint(path)); }

TrainResult train(const LightFieldDataset& dataset, const HoldoutSplit& split, const DecoderConfig& decoder_config,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    check_decoder_fits(dataset, decoder_config, DecoderMode::Geometry);
    if (split.train.empty()) {
        throw UsageError("training set is empty");
    }
    Decoder decoder = Decoder::init(decoder_config);
    ViewSet views(dataset, split.holdout);
    const DecoderGeometry source(decoder);
    const bool temporal = config.temporal && dataset.frames > 1;

    InterpOptions options;
    options.kappa = config.kappa;
    options.occlusion = config.occlusion;
    options.exclude_self = true;
    options.max_spatial_neighbors = config.max_spatial_neighbors;

    auto step = [&](Graph& graph, const GridIndex& index) {
        GeometryCache cache(source, &graph);
        const LFCoordinate y = dataset.coordinate(index);
        const Tensor& target = views.image(index);
        const Tensor spatial_loss = l1_loss(&graph, interpolate_spatial(cache, views, y, options, &graph), target);
        Tensor full_loss = spatial_loss;
        if (temporal && !temporal_neighbors(views, y, true).empty()) {
            full_loss = l1_loss(&graph, interpolate_temporal(cache, views, y, options, &graph), target);
        }
        const Tensor total =
            ops::add(&graph, ops::scale(&graph, spatial_loss, static_cast<float>(config.lambda_spatial)),
                     ops::scale(&graph, full_loss, static_cast<float>(config.lambda_full)));
        return std::make_tuple(total, static_cast<double>(spatial_loss.item()),
                               static_cast<double>(full_loss.item()));
    };
    TrainLog log = run_epochs(dataset, split, config, decoder, views, on_epoch, true, step);
    log.holdout_mse = holdout_error(dataset, split, decoder, config);
    if (config.checkpoint_every > 0 && !config.checkpoint_path.empty()) {
        save_model(config.checkpoint_path, snapshot(dataset, split, decoder, config));
    }
    return {std::move(decoder), std::move(log)};
}

TrainResult train_color(const LightFieldDataset& dataset, const HoldoutSplit& split,
                        const DecoderConfig& decoder_config, const TrainConfig& config,
                        const EpochCallback& on_epoch) {
    config.validate();
    check_decoder_fits(dataset, decoder_config, DecoderMode::Color);
    if (split.train.empty()) {
        throw UsageError("training set is empty");
    }
    Decoder decoder = Decoder::init(decoder_config);
    ViewSet views(dataset, split.holdout);
    auto step = [&](Graph& graph, const GridIndex& index) {
        const Tensor loss = l1_loss(&graph, decoder.decode(dataset.coordinate(index), &graph), views.image(index));
        const double value = loss.item();
        return std::make_tuple(loss, value, value);
    };
    TrainLog log = run_epochs(dataset, split, config, decoder, views, on_epoch, false, step);
    if (!split.holdout.empty()) {
        double total = 0.0;
        for (const auto& h : split.holdout) {
            total += mse(to_image(decoder.decode(dataset.coordinate(h))), dataset.image(h));
        }
        log.holdout_mse = total / static_cast<double>(split.holdout.size());
    }
    return {std::move(decoder), std::move(log)};
}

} // namespace nlfv
