// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include "nlfv/error.hpp"
#include "nlfv/evaluator.hpp"
#include "nlfv/image.hpp"
#include "nlfv/pipeline.hpp"
#include "nlfv/service.hpp"
#include "nlfv/synthetic.hpp"
#include "nlfv/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace nlfv::cli {
namespace {

struct GenerateArgs {
    std::string spec;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string holdout = "none";
};

struct TrainArgs {
    std::string data;
    std::string out;
    int epochs = 100;
    double lr = 1e-4;
    std::string holdout = "manifest";
    bool no_temporal = false;
    bool no_occlusion = false;
    float kappa = 50.0f;
    std::uint64_t seed = 0;
    int base_channels = 128;
    int min_channels = 8;
    double lambda_spatial = 1.0;
    double lambda_full = 1.0;
    int checkpoint_every = 0;
    bool with_color = false;
};

struct RenderArgs {
    std::string ckpt;
    std::string data;
    double u = 0.5;
    double v = 0.5;
    double t = 0.0;
    std::string mode = "full";
    double dof = 0.0;
    int samples = 16;
    double motion_blur = 0.0;
    std::string out = "frame.ppm";
};

struct EvaluateArgs {
    std::string ckpt;
    std::string data;
    std::string methods;
    std::string report;
    std::uint64_t seed = 0;
};

struct BenchArgs {
    std::string ckpt;
    std::string data;
    int n = 50;
    std::uint64_t seed = 0;
    std::string report;
};

struct ServeArgs {
    std::string ckpt;
    std::string data;
    std::string host = "127.0.0.1";
    int port = 8080;
    int max_concurrent = 4;
    std::string mode = "full";
};

// A loaded checkpoint with the dataset it renders and a context that hides
// the checkpoint's holdout.
struct Session {
    LightFieldDataset dataset;
    Model model;
    std::unique_ptr<ViewSet> views;
    std::unique_ptr<DecoderGeometry> geometry;
    RenderContext context;
};

std::unique_ptr<Session> open_session(const std::string& ckpt, const std::string& data) {
    auto s = std::make_unique<Session>(Session{load_dataset(data), load_model(ckpt), nullptr, nullptr, {}});
    s->model.check_compatible(s->dataset);
    s->views = std::make_unique<ViewSet>(s->dataset, s->model.holdout);
    s->geometry = std::make_unique<DecoderGeometry>(s->model.geometry);
    s->context.views = s->views.get();
    s->context.geometry = s->geometry.get();
    s->context.color_decoder = s->model.color ? &*s->model.color : nullptr;
    s->context.kappa = s->model.train_config.kappa;
    s->context.max_spatial_neighbors = s->model.train_config.max_spatial_neighbors;
    return s;
}

void print_config(std::ostream& out, const std::string& command, const nlohmann::json& config) {
    out << command << " config: " << config.dump() << '\n';
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw Error("cannot write " + path.string());
    }
    file << text;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    SceneSpec spec = load_scene_spec(a.spec);
    if (a.seed) {
        spec.seed = *a.seed;
    }
    print_config(out, "generate", scene_to_json(spec));
    LightFieldDataset dataset = generate_synthetic(spec);
    dataset.holdout = holdout_split(dataset, HoldoutSpec::parse(a.holdout)).holdout;
    save_dataset(dataset, a.out);
    out << "wrote " << dataset.images.size() << " views to " << a.out << '\n';
    return 0;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    const LightFieldDataset dataset = load_dataset(a.data);
    HoldoutSpec holdout;
    if (a.holdout == "manifest") {
        holdout.pattern = dataset.holdout.empty() ? HoldoutPattern::None : HoldoutPattern::Explicit;
        holdout.indices.assign(dataset.holdout.begin(), dataset.holdout.end());
    } else {
        holdout = HoldoutSpec::parse(a.holdout);
    }
    const HoldoutSplit split = holdout_split(dataset, holdout);

    DecoderConfig decoder;
    decoder.width = dataset.width;
    decoder.height = dataset.height;
    decoder.base_channels = a.base_channels;
    decoder.min_channels = a.min_channels;
    decoder.seed = a.seed;

    TrainConfig config;
    config.learning_rate = a.lr;
    config.epochs = a.epochs;
    config.lambda_spatial = a.lambda_spatial;
    config.lambda_full = a.lambda_full;
    config.temporal = !a.no_temporal;
    config.occlusion = !a.no_occlusion;
    config.kappa = a.kappa;
    config.seed = a.seed;
    config.checkpoint_every = a.checkpoint_every;
    config.checkpoint_path = a.out;
    config.log_path = a.out + ".log.csv";
    config.validate();

    nlohmann::json resolved = {{"data", a.data},
                               {"out", a.out},
                               {"decoder", decoder.to_json()},
                               {"train", config.to_json()},
                               {"holdout", nlohmann::json::array()},
                               {"with_color_baseline", a.with_color}};
    for (const auto& h : split.holdout) {
        resolved["holdout"].push_back({h.i, h.j, h.k});
    }
    print_config(out, "train", resolved);
    if (a.epochs == 0) {
        err << "warning: --epochs 0 writes the initialized (untrained) weights\n";
    }

    TrainResult result = train(dataset, split, decoder, config, [&](const EpochRecord& r) {
        if (r.epoch == 1 || r.epoch == a.epochs || r.epoch % 10 == 0) {
            out << "epoch " << r.epoch << " loss " << r.loss_total << " (spatial " << r.loss_spatial << ", full "
                << r.loss_full << ") " << std::fixed << std::setprecision(2) << r.seconds << "s\n"
                << std::defaultfloat << std::setprecision(6);
        }
    });
    Model model{result.decoder, std::nullopt, dataset.scene, dataset.width, dataset.height, split.holdout, config};
    if (a.with_color) {
        DecoderConfig color = decoder;
        color.mode = DecoderMode::Color;
        TrainConfig color_config = config;
        color_config.log_path.clear();
        color_config.checkpoint_every = 0;
        model.color = train_color(dataset, split, color, color_config).decoder;
    }
    save_model(a.out, model);

    nlohmann::json summary = {{"holdout", resolved["holdout"]},
                              {"touched", nlohmann::json::array()},
                              {"adam_steps", result.log.adam_steps},
                              {"epochs", a.epochs}};
    for (const auto& g : result.log.touched) {
        summary["touched"].push_back({g.i, g.j, g.k});
    }
    if (result.log.holdout_mse) {
        summary["holdout_l2"] = *result.log.holdout_mse;
        out << "holdout L2 " << *result.log.holdout_mse << '\n';
    }
    if (!result.log.epochs.empty()) {
        summary["initial_loss"] = result.log.epochs.front().loss_total;
        summary["final_loss"] = result.log.epochs.back().loss_total;
    }
    write_text(a.out + ".train.json", summary.dump(2) + "\n");
    out << "wrote checkpoint " << a.out << '\n';
    return 0;
}

int cmd_render(const RenderArgs& a, std::ostream& out) {
    const LFCoordinate x{a.u, a.v, a.t};
    require_in_unit_cube(x);
    const RenderMode mode = RenderMode::parse(a.mode);
    if (a.dof < 0.0 || a.motion_blur < 0.0) {
        throw UsageError("--dof and --motion-blur must be >= 0");
    }
    if (a.dof > 0.0 && a.motion_blur > 0.0) {
        throw UsageError("--dof and --motion-blur cannot be combined");
    }
    if ((a.dof > 0.0 || a.motion_blur > 0.0) && mode.kind != RenderModeKind::Full) {
        throw UsageError("--dof and --motion-blur use the full mode");
    }
    print_config(out, "render",
                 {{"ckpt", a.ckpt},
                  {"data", a.data},
                  {"u", a.u},
                  {"v", a.v},
                  {"t", a.t},
                  {"mode", mode.name()},
                  {"dof", a.dof},
                  {"samples", a.samples},
                  {"motion_blur", a.motion_blur},
                  {"out", a.out}});
    const auto session = open_session(a.ckpt, a.data);
    const auto start = std::chrono::steady_clock::now();
    Image image;
    if (a.dof > 0.0) {
        image = render_dof(session->context, x, a.dof, a.samples);
    } else if (a.motion_blur > 0.0) {
        image = render_motion_blur(session->context, x, a.motion_blur, a.samples);
    } else {
        image = render(session->context, x, mode);
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    write_ppm(a.out, image);
    out << "render time " << std::fixed << std::setprecision(3) << ms << " ms\n" << std::defaultfloat;
    out << "wrote " << a.out << '\n';
    return 0;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const auto session = open_session(a.ckpt, a.data);
    std::vector<std::string> names = split_list(a.methods);
    if (names.empty()) {
        names = {"full", "no-occlusion", "blend"};
        if (session->model.color) {
            names.push_back("no-warp");
        }
    }
    std::vector<RenderMode> methods;
    for (const auto& n : names) {
        methods.push_back(RenderMode::parse(n));
    }
    if (session->model.holdout.empty()) {
        throw UsageError("checkpoint has no holdout; retrain with --holdout center-view (or i,j,k;...) to evaluate");
    }
    EvalReport report = evaluate_holdout(session->dataset, session->model.holdout, session->context, methods, a.seed);
    const std::filesystem::path csv = a.report.empty() ? report.file_stem() + ".csv" : a.report;
    std::filesystem::path json = csv;
    json.replace_extension(".json");
    print_config(out, "evaluate",
                 {{"ckpt", a.ckpt}, {"data", a.data}, {"methods", names}, {"report", csv.string()}, {"seed", a.seed}});
    write_text(csv, report.to_csv());
    write_text(json, report.to_json().dump(2) + "\n");
    for (const auto& s : report.summary()) {
        out << s.method << ": L2 " << s.mean_l2 << "  DSSIM " << s.mean_dssim << "  PSNR " << s.mean_psnr
            << " dB  (n=" << s.count << ")\n";
    }
    out << "wrote " << csv.string() << " and " << json.string() << '\n';
    return 0;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    print_config(out, "bench", {{"ckpt", a.ckpt}, {"data", a.data}, {"n", a.n}, {"seed", a.seed}});
    const auto session = open_session(a.ckpt, a.data);
    const TimingStats stats = bench_render(session->context, a.n, a.seed);
    out << std::fixed << std::setprecision(3);
    out << "renders " << stats.samples << '\n'
        << "mean " << stats.mean_ms << " ms  p95 " << stats.p95_ms << " ms  stddev " << stats.stddev_ms << " ms\n"
        << "decode " << stats.mean_decode_ms << " ms  warp+occlusion " << stats.mean_warp_ms << " ms\n";
    out << std::defaultfloat;
    if (!a.report.empty()) {
        EvalReport report;
        report.scene = session->dataset.scene;
        report.seed = a.seed;
        report.timing = stats;
        write_text(a.report, report.to_json().dump(2) + "\n");
    }
    return 0;
}

FrameService* g_service = nullptr;

extern "C" void handle_signal(int) {
    if (g_service != nullptr) {
        g_service->stop();
    }
}

int cmd_serve(const ServeArgs& a, std::ostream& out) {
    ServiceConfig config;
    config.host = a.host;
    config.port = a.port;
    config.max_concurrent = a.max_concurrent;
    config.default_mode = RenderMode::parse(a.mode);
    config.validate();
    print_config(out, "serve",
                 {{"ckpt", a.ckpt},
                  {"data", a.data},
                  {"host", a.host},
                  {"port", a.port},
                  {"max_concurrent", a.max_concurrent},
                  {"mode", config.default_mode.name()}});
    const auto session = open_session(a.ckpt, a.data);
    FrameService service(session->dataset, session->model, config);
    const int port = service.bind();
    out << "listening on http://" << a.host << ':' << port << std::endl;
    g_service = &service;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    service.listen();
    g_service = nullptr;
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Neural light-field video: generate, train, render, evaluate, bench, serve", "nlfv"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Render a synthetic scene spec into a dataset directory");
    generate->add_option("--spec", gen.spec, "Scene spec JSON")->required();
    generate->add_option("--out", gen.out, "Output dataset directory")->required();
    generate->add_option("--seed", gen.seed, "Override the spec's texture seed");
    generate->add_option("--holdout", gen.holdout, "Holdout recorded in the manifest");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Fit a geometry decoder to a dataset");
    train_cmd->add_option("--data", tr.data, "Dataset directory or manifest")->required();
    train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
    train_cmd->add_option("--epochs", tr.epochs, "Epochs")->capture_default_str();
    train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--holdout", tr.holdout, "manifest | none | center-view | center-frame | i,j,k;...")
        ->capture_default_str();
    train_cmd->add_flag("--no-temporal", tr.no_temporal, "Disable the temporal stage");
    train_cmd->add_flag("--no-occlusion", tr.no_occlusion, "Train with uniform blend weights");
    train_cmd->add_option("--kappa", tr.kappa, "Occlusion sharpness")->capture_default_str();
    train_cmd->add_option("--seed", tr.seed, "RNG seed")->capture_default_str();
    train_cmd->add_option("--base-channels", tr.base_channels, "Decoder width")->capture_default_str();
    train_cmd->add_option("--min-channels", tr.min_channels, "Decoder channel floor")->capture_default_str();
    train_cmd->add_option("--lambda-spatial", tr.lambda_spatial, "Spatial-stage loss weight")->capture_default_str();
    train_cmd->add_option("--lambda-full", tr.lambda_full, "Full-pipeline loss weight")->capture_default_str();
    train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint cadence in epochs");
    train_cmd->add_flag("--with-color-baseline", tr.with_color, "Also fit a color decoder for the no-warp mode");

    RenderArgs rn;
    auto* render_cmd = app.add_subcommand("render", "Render one frame at a continuous coordinate");
    render_cmd->add_option("--ckpt", rn.ckpt, "Checkpoint")->required();
    render_cmd->add_option("--data", rn.data, "Dataset directory or manifest")->required();
    render_cmd->add_option("-u", rn.u, "View u in [0,1]");
    render_cmd->add_option("-v", rn.v, "View v in [0,1]");
    render_cmd->add_option("-t", rn.t, "Time t in [0,1]");
    render_cmd->add_option("--mode", rn.mode, "full | no-occlusion | no-warp | blend | down-up[:k]");
    render_cmd->add_option("--dof", rn.dof, "Depth-of-field aperture radius in (u,v)");
    render_cmd->add_option("--samples", rn.samples, "Samples for --dof / --motion-blur")->capture_default_str();
    render_cmd->add_option("--motion-blur", rn.motion_blur, "Shutter interval in t");
    render_cmd->add_option("--out", rn.out, "Output PPM")->capture_default_str();

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Hold-out evaluation of render methods");
    evaluate->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
    evaluate->add_option("--data", ev.data, "Dataset directory or manifest")->required();
    evaluate->add_option("--methods", ev.methods, "Comma-separated modes");
    evaluate->add_option("--report", ev.report, "CSV report path (JSON written beside it)");
    evaluate->add_option("--seed", ev.seed, "Seed recorded in the report");

    BenchArgs bn;
    auto* bench = app.add_subcommand("bench", "Time full renders at random coordinates");
    bench->add_option("--ckpt", bn.ckpt, "Checkpoint")->required();
    bench->add_option("--data", bn.data, "Dataset directory or manifest")->required();
    bench->add_option("-n", bn.n, "Number of renders")->capture_default_str();
    bench->add_option("--seed", bn.seed, "Coordinate seed");
    bench->add_option("--report", bn.report, "Optional JSON timing report");

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve", "Serve frames over HTTP");
    serve->add_option("--ckpt", sv.ckpt, "Checkpoint")->required();
    serve->add_option("--data", sv.data, "Dataset directory or manifest")->required();
    serve->add_option("--host", sv.host, "Bind address")->capture_default_str();
    serve->add_option("--port", sv.port, "Port (0 picks a free one)")->capture_default_str();
    serve->add_option("--max-concurrent", sv.max_concurrent, "Concurrent render cap")->capture_default_str();
    serve->add_option("--mode", sv.mode, "Default render mode")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (generate->parsed()) return cmd_generate(gen, out);
        if (train_cmd->parsed()) return cmd_train(tr, out, err);
        if (render_cmd->parsed()) return cmd_render(rn, out);
        if (evaluate->parsed()) return cmd_evaluate(ev, out);
        if (bench->parsed()) return cmd_bench(bn, out);
        if (serve->parsed()) return cmd_serve(sv, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const LoadError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "fatal: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace nlfv::cli
