// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include "gradcheck.hpp"
#include "op_cases.hpp"

#include "nlfv/error.hpp"
#include "nlfv/evaluator.hpp"
#include "nlfv/metrics.hpp"
#include "nlfv/pipeline.hpp"
#include "nlfv/service.hpp"
#include "nlfv/synthetic.hpp"
#include "nlfv/trainer.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <unistd.h>

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <sys/wait.h>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace nlfv::acceptance {
namespace {

namespace fs = std::filesystem;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

struct Settings {
    std::string cli;
    fs::path workdir;
    std::set<int> only;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string number(double v) {
    char buffer[64];
    const auto r = std::to_chars(buffer, buffer + sizeof(buffer), v);
    return {buffer, r.ptr};
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

// Runs the CLI binary; stdout and stderr go to `log`.
int run_cli(const Settings& s, const std::vector<std::string>& args, const fs::path& log) {
    std::string command = quote(s.cli);
    for (const auto& a : args) {
        command += " " + quote(a);
    }
    command += " > " + quote(log.string()) + " 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void require_cli(const Settings& s, const std::vector<std::string>& args, const fs::path& log) {
    const int code = run_cli(s, args, log);
    if (code != 0) {
        throw Error("nlfv " + args.front() + " exited with " + std::to_string(code) + ": " + read_file(log));
    }
}

// 1. Finite-difference checks for every op and for the end-to-end loss.
void gradient_integrity(Outcome& o) {
    const auto start = std::chrono::steady_clock::now();
    const auto cases = testing::op_cases();
    double worst = 0.0;
    std::string worst_op;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        std::mt19937_64 rng(1000 + c);
        for (int trial = 0; trial < 20; ++trial) {
            const auto r = testing::grad_check(cases[c].op, cases[c].make(rng), rng);
            if (r.max_error > worst) {
                worst = r.max_error;
                worst_op = cases[c].name;
            }
        }
    }
    o.check(worst < 1e-3, "op gradient error");
    o.detail << cases.size() << " ops x 20 trials, worst rel err " << worst << " (" << worst_op << "); ";

    const SceneSpec spec = moving_layer_scene(8, 2, 3);
    const LightFieldDataset ds = generate_synthetic(spec);
    ViewSet views(ds, {});
    DecoderConfig dc;
    dc.width = 8;
    dc.height = 8;
    dc.base_channels = 8;
    dc.seed = 5;
    const Decoder decoder = Decoder::init(dc);
    const DecoderGeometry source(decoder);
    InterpOptions opts;
    opts.exclude_self = true;
    opts.kappa = 5.0f;
    double e2e_worst = 0.0;
    int e2e_checked = 0;
    std::mt19937_64 rng(21);
    for (const GridIndex target : {GridIndex{1, 0, 1}, GridIndex{0, 1, 1}}) {
        const LFCoordinate x = ds.coordinate(target);
        auto loss_value = [&] {
            GeometryCache cache(source, nullptr);
            return static_cast<double>(
                l1_loss(nullptr, interpolate_temporal(cache, views, x, opts), views.image(target)).item());
        };
        for (auto p : decoder.parameters()) p.clear_grad();
        Graph graph;
        GeometryCache cache(source, &graph);
        graph.backward(l1_loss(&graph, interpolate_temporal(cache, views, x, opts, &graph), views.image(target)));
        auto params = decoder.parameters();
        std::uniform_int_distribution<std::size_t> pick_tensor(0, params.size() - 1);
        int checked = 0;
        for (int attempt = 0; attempt < 100 && checked < 5; ++attempt) {
            Tensor p = params[pick_tensor(rng)];
            std::uniform_int_distribution<std::size_t> pick(0, p.numel() - 1);
            const std::size_t i = pick(rng);
            const auto numeric = testing::smooth_difference(loss_value, p.values()[i], 1e-3f);
            if (!numeric) continue;
            e2e_worst = std::max(e2e_worst, std::fabs(p.grad()[i] - *numeric) / std::max(1.0, std::fabs(*numeric)));
            ++checked;
        }
        e2e_checked += checked;
    }
    o.check(e2e_worst < 1e-2, "end-to-end gradient error");
    o.check(e2e_checked == 10, "too few smooth end-to-end samples");
    const double elapsed = seconds_since(start);
    o.check(elapsed < 60.0, "runtime over 60 s");
    o.detail << "end-to-end " << e2e_checked << " weights, worst rel err " << e2e_worst << "; " << std::fixed << std::setprecision(1) << elapsed
             << " s";
}

// 2. Oracle-geometry warps between every pair of views, then the spatial
// reconstruction of the held-out center view.
void warp_oracle(Outcome& o) {
    const auto start = std::chrono::steady_clock::now();
    const SceneSpec spec = two_layer_scene(64, 3);
    const LightFieldDataset ds = generate_synthetic(spec);
    const int w = spec.width;
    const int h = spec.height;
    double min_psnr = kPsnrCap;
    double min_coverage = 1.0;
    for (const GridIndex& tgt : ds.all_indices()) {
        const LFCoordinate xt = ds.coordinate(tgt);
        const Tensor geom = oracle_geometry(spec, xt);
        const auto tgt_layers = layer_map(spec, xt);
        for (const GridIndex& src : ds.all_indices()) {
            if (src == tgt) continue;
            const LFCoordinate xs = ds.coordinate(src);
            const Tensor flow = spatial_flow(nullptr, geom, {xs.u, xs.v}, {xt.u, xt.v}, spec.disparity_scale);
            const Image warped = to_image(warp(nullptr, to_tensor(ds.image(src)), flow));
            const auto src_layers = layer_map(spec, xs);
            // Valid: the sample lands inside the source and sees the same layer.
            std::vector<unsigned char> mask(static_cast<std::size_t>(w) * h, 0);
            std::size_t valid = 0;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const int p = y * w + x;
                    const double sx = x + flow.values()[p];
                    const double sy = y + flow.values()[w * h + p];
                    if (sx < 0 || sy < 0 || sx > w - 1 || sy > h - 1) continue;
                    const int q = static_cast<int>(std::lround(sy)) * w + static_cast<int>(std::lround(sx));
                    if (src_layers[q] != tgt_layers[p]) continue;
                    mask[p] = 1;
                    ++valid;
                }
            }
            min_coverage = std::min(min_coverage, static_cast<double>(valid) / (w * h));
            min_psnr = std::min(min_psnr, psnr_from_mse(masked_mse(warped, ds.image(tgt), mask)));
        }
    }
    o.check(min_psnr > 35.0, "pairwise warp PSNR <= 35 dB");
    o.detail << "72 warps, min PSNR " << std::fixed << std::setprecision(2) << min_psnr << " dB (min valid coverage "
             << std::setprecision(3) << min_coverage << "); ";

    ViewSet views(ds, {{1, 1, 0}});
    OracleGeometry oracle(spec);
    GeometryCache cache(oracle, nullptr);
    const Image center = to_image(interpolate_spatial(cache, views, ds.coordinate({1, 1, 0}), {}));
    const double center_psnr = psnr(center, ds.image({1, 1, 0}));
    o.check(center_psnr > 30.0, "center reconstruction PSNR <= 30 dB");
    const double elapsed = seconds_since(start);
    o.check(elapsed < 60.0, "runtime over 60 s");
    o.detail << "held-out center " << std::setprecision(2) << center_psnr << " dB; " << std::setprecision(1) << elapsed
             << " s";
}

// 3. Weights form a partition of unity; full and no-occlusion agree when every
// warped input is the same.
void partition_of_unity(Outcome& o) {
    const SceneSpec spec = moving_layer_scene(32, 3, 5);
    const LightFieldDataset ds = generate_synthetic(spec);
    ViewSet views(ds, {{1, 1, 2}});
    DecoderConfig dc;
    dc.width = 32;
    dc.height = 32;
    dc.base_channels = 32;
    dc.seed = 9;
    const Decoder decoder = Decoder::init(dc);
    const DecoderGeometry geometry(decoder);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    std::size_t maps = 0;
    for (int n = 0; n < 12; ++n) {
        LFCoordinate x{unit(rng), unit(rng), unit(rng)};
        if (n < 3) x = ds.coordinate({n, 2 - n, n});
        for (const float kappa : {1.0f, 50.0f, 500.0f}) {
            GeometryCache cache(geometry, nullptr);
            InterpTrace trace;
            InterpOptions opts;
            opts.kappa = kappa;
            opts.trace = &trace;
            interpolate_temporal(cache, views, x, opts);
            std::vector<Tensor> all = trace.spatial_weights;
            all.insert(all.end(), trace.temporal_weights.begin(), trace.temporal_weights.end());
            for (const auto& wts : all) {
                const int k = wts.dim(0);
                const std::size_t plane = wts.numel() / k;
                for (std::size_t p = 0; p < plane; ++p) {
                    double s = 0.0;
                    for (int i = 0; i < k; ++i) s += wts.values()[i * plane + p];
                    worst = std::max(worst, std::fabs(s - 1.0));
                }
                ++maps;
            }
        }
    }
    o.check(worst <= 1e-5, "weight sum off by more than 1e-5");
    o.detail << maps << " weight maps, max |sum - 1| " << worst << "; ";

    // Identical inputs: zero-parallax scene with its oracle (zero flow).
    const SceneSpec flat = zero_parallax_scene(32, 3);
    const LightFieldDataset flat_ds = generate_synthetic(flat);
    ViewSet flat_views(flat_ds, {{1, 1, 0}});
    OracleGeometry oracle(flat);
    RenderContext ctx{&flat_views, &oracle, nullptr};
    bool exact = true;
    for (int n = 0; n < 5; ++n) {
        const LFCoordinate x{unit(rng), unit(rng), 0.0};
        exact = exact && render(ctx, x, RenderMode::parse("full")) == render(ctx, x, RenderMode::parse("no-occlusion"));
    }
    o.check(exact, "zero-parallax full != no-occlusion");

    // Identical inputs under arbitrary flows: a constant-color scene warped by
    // an untrained decoder.
    SceneSpec constant = zero_parallax_scene(32, 3);
    constant.layers[0].texture_scale = 1e6;
    LightFieldDataset const_ds = generate_synthetic(constant);
    for (auto& [index, image] : const_ds.images) {
        for (int c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < image.pixel_count(); ++p) image.data[c * image.pixel_count() + p] = 0.2f + 0.3f * c;
    }
    ViewSet const_views(const_ds, {});
    RenderContext rctx{&const_views, &geometry, nullptr};
    double max_diff = 0.0;
    for (int n = 0; n < 5; ++n) {
        const LFCoordinate x{unit(rng), unit(rng), 0.0};
        const Image a = render(rctx, x, RenderMode::parse("full"));
        const Image b = render(rctx, x, RenderMode::parse("no-occlusion"));
        for (std::size_t i = 0; i < a.data.size(); ++i)
            max_diff = std::max(max_diff, static_cast<double>(std::fabs(a.data[i] - b.data[i])));
    }
    o.check(max_diff <= 1e-6, "constant-scene full vs no-occlusion differ");
    o.detail << "zero-parallax full==no-occlusion bit-exact: " << (exact ? "yes" : "no")
             << "; constant scene max diff " << max_diff;
}

struct TrainedScene {
    LightFieldDataset ds;
    HoldoutSplit split;
    Model model;
    double seconds = 0.0;
};

TrainedScene train_scene(const SceneSpec& spec, const std::string& holdout, int base, double lr, int epochs,
                         bool with_color) {
    const auto start = std::chrono::steady_clock::now();
    LightFieldDataset ds = generate_synthetic(spec);
    HoldoutSplit split = holdout_split(ds, HoldoutSpec::parse(holdout));
    DecoderConfig dc;
    dc.width = spec.width;
    dc.height = spec.height;
    dc.base_channels = base;
    TrainConfig tc;
    tc.learning_rate = lr;
    tc.epochs = epochs;
    const TrainResult r = train(ds, split, dc, tc);
    Model model{r.decoder, std::nullopt, ds.scene, spec.width, spec.height, split.holdout, tc};
    if (with_color) {
        DecoderConfig cc = dc;
        cc.mode = DecoderMode::Color;
        model.color = train_color(ds, split, cc, tc).decoder;
    }
    const double seconds = seconds_since(start);
    return {std::move(ds), std::move(split), std::move(model), seconds};
}

// 4. Spatial training on the two-layer scene.
void spatial_training(Outcome& o) {
    const SceneSpec spec = two_layer_scene(64, 3);
    // 250 epochs x 8 training views = 2000 Adam steps.
    const TrainedScene s = train_scene(spec, "center-view", 64, 1e-3, 250, true);
    ViewSet views(s.ds, s.split.holdout);
    const DecoderGeometry geometry(s.model.geometry);
    RenderContext ctx{&views, &geometry, &*s.model.color};
    const std::vector<RenderMode> methods{RenderMode::parse("full"), RenderMode::parse("no-occlusion"),
                                          RenderMode::parse("blend"), RenderMode::parse("no-warp")};
    const EvalReport report = evaluate_holdout(s.ds, s.split.holdout, ctx, methods);
    const double full = report.method("full").mean_l2;
    const double no_occ = report.method("no-occlusion").mean_l2;
    const double blend = report.method("blend").mean_l2;
    const double no_warp = report.method("no-warp").mean_l2;
    o.check(full < no_occ, "full >= no-occlusion");
    o.check(no_occ < blend, "no-occlusion >= blend");
    o.check(full < no_warp, "full >= no-warp");

    OracleGeometry oracle(spec);
    RenderContext octx{&views, &oracle, nullptr};
    const RenderMode full_mode;
    const double oracle_l2 = evaluate_holdout(s.ds, s.split.holdout, octx, std::span(&full_mode, 1)).rows[0].l2;
    o.check(oracle_l2 <= full + 1e-3, "oracle geometry worse than trained");
    o.check(s.seconds < 15 * 60, "runtime over 15 min");
    o.detail << std::scientific << std::setprecision(3) << "L2 full " << full << " < no-occlusion " << no_occ
             << " < blend " << blend << "; no-warp " << no_warp << "; oracle " << oracle_l2 << "; " << std::fixed
             << std::setprecision(0) << s.seconds << " s";
}

// 5. Temporal training on the moving-layer scene, middle frame held out.
void temporal_training(Outcome& o) {
    const SceneSpec spec = moving_layer_scene(32, 3, 5);
    const TrainedScene s = train_scene(spec, "center-frame", 64, 1e-3, 100, false);
    ViewSet views(s.ds, s.split.holdout);
    const DecoderGeometry geometry(s.model.geometry);
    RenderContext ctx{&views, &geometry, nullptr};
    const std::vector<RenderMode> methods{RenderMode::parse("full"), RenderMode::parse("blend")};
    const EvalReport report = evaluate_holdout(s.ds, s.split.holdout, ctx, methods);
    double center_full = 0.0;
    double center_blend = 0.0;
    for (const auto& row : report.rows) {
        if (row.index == GridIndex{1, 1, 2}) (row.method == "full" ? center_full : center_blend) = row.l2;
    }
    o.check(center_full < center_blend, "full >= blend at the held-out middle frame");

    const double t = 0.3;
    const Image a = render(ctx, {0.5, 0.5, t}, RenderMode{});
    const double near = mse(a, render(ctx, {0.5, 0.5, t + 0.02}, RenderMode{}));
    const double far = mse(a, render(ctx, {0.5, 0.5, t + 0.2}, RenderMode{}));
    o.check(near < 10.0 * far, "small time step not below 10x large step");
    o.check(far > 0.0, "renders do not vary with t");
    o.detail << std::scientific << std::setprecision(3) << "center view t=0.5: L2 full " << center_full << " < blend "
             << center_blend << " (all views: " << report.method("full").mean_l2 << " vs "
             << report.method("blend").mean_l2 << "); continuity L2(dt=0.02) " << near << ", L2(dt=0.2) " << far
             << "; " << std::fixed << std::setprecision(0) << s.seconds << " s";
}

// 6. Denser observation grids reconstruct the same target no worse.
void sparsity_trend(Outcome& o) {
    SweepOptions opts;
    opts.grids = {3, 5};
    opts.decoder.width = 32;
    opts.decoder.height = 32;
    opts.decoder.base_channels = 64;
    opts.train.learning_rate = 1e-3;
    opts.train.epochs = 100;
    const auto table = sparsity_sweep(two_layer_scene(32, 3), opts);
    o.check(table.size() == 2, "sweep rows");
    o.check(table[1].l2 <= table[0].l2, "5x5 L2 > 3x3 L2");
    o.detail << std::scientific << std::setprecision(3);
    for (const auto& e : table) {
        o.detail << e.grid << "x" << e.grid << " L2 " << e.l2 << " DSSIM " << e.dssim << " (" << std::fixed
                 << std::setprecision(0) << e.train_seconds << " s" << std::scientific << std::setprecision(3)
                 << "); ";
    }
}

struct CliArtifacts {
    fs::path data;
    fs::path ckpt;
};

CliArtifacts make_cli_artifacts(const Settings& s) {
    const fs::path dir = s.workdir / "cli";
    fs::create_directories(dir);
    SceneSpec spec = moving_layer_scene(16, 3, 3);
    spec.name = "acceptance_moving";
    {
        std::ofstream(dir / "spec.json") << scene_to_json(spec).dump(2);
    }
    require_cli(s, {"generate", "--spec", (dir / "spec.json").string(), "--out", (dir / "data").string(),
                    "--holdout", "center-view"},
                dir / "generate.log");
    require_cli(s, {"train", "--data", (dir / "data").string(), "--out", (dir / "model.ckpt").string(), "--epochs",
                    "3", "--base-channels", "16", "--seed", "7"},
                dir / "train.log");
    return {dir / "data", dir / "model.ckpt"};
}

// 7. Fixed seeds reproduce checkpoints and frames bit for bit.
void determinism(const Settings& s, Outcome& o) {
    const CliArtifacts art = make_cli_artifacts(s);
    const fs::path dir = s.workdir / "determinism";
    fs::create_directories(dir);
    require_cli(s, {"generate", "--spec", (art.data.parent_path() / "spec.json").string(), "--out",
                    (dir / "data").string(), "--holdout", "center-view"},
                dir / "generate.log");
    bool same_data = true;
    for (const auto& entry : fs::directory_iterator(art.data)) {
        same_data = same_data && read_file(entry.path()) == read_file(dir / "data" / entry.path().filename());
    }
    o.check(same_data, "regenerated dataset differs");

    require_cli(s, {"train", "--data", (dir / "data").string(), "--out", (dir / "model.ckpt").string(), "--epochs",
                    "3", "--base-channels", "16", "--seed", "7"},
                dir / "train.log");
    const bool same_ckpt = read_file(art.ckpt) == read_file(dir / "model.ckpt");
    o.check(same_ckpt, "retrained checkpoint differs");
    o.check(read_file(art.ckpt.string() + ".log.csv").size() > 0, "missing training log");

    bool same_frames = true;
    for (const char* t : {"0", "0.37", "1"}) {
        for (const auto& [ckpt, out] : {std::pair{art.ckpt, dir / "a.ppm"}, std::pair{dir / "model.ckpt", dir / "b.ppm"}}) {
            require_cli(s, {"render", "--ckpt", ckpt.string(), "--data", art.data.string(), "-u", "0.61", "-v", "0.2",
                            "-t", t, "--out", out.string()},
                        dir / "render.log");
        }
        same_frames = same_frames && read_file(dir / "a.ppm") == read_file(dir / "b.ppm");
    }
    o.check(same_frames, "rendered frames differ");

    const Model loaded = load_model(art.ckpt);
    save_model(dir / "roundtrip.ckpt", loaded);
    const bool same_roundtrip = read_file(art.ckpt) == read_file(dir / "roundtrip.ckpt");
    const Checkpoint a = model_to_checkpoint(loaded);
    const Checkpoint b = model_to_checkpoint(load_model(dir / "roundtrip.ckpt"));
    bool same_tensors = a.tensors.size() == b.tensors.size();
    for (std::size_t i = 0; same_tensors && i < a.tensors.size(); ++i) {
        same_tensors = a.tensors[i].name == b.tensors[i].name &&
                       std::equal(a.tensors[i].tensor.values().begin(), a.tensors[i].tensor.values().end(),
                                  b.tensors[i].tensor.values().begin(), b.tensors[i].tensor.values().end(),
                                  [](float x, float y) { return std::memcmp(&x, &y, sizeof(float)) == 0; });
    }
    o.check(same_roundtrip && same_tensors, "checkpoint round trip not exact");
    o.detail << "dataset bytes equal: " << same_data << ", checkpoint bytes equal: " << same_ckpt
             << ", frames equal: " << same_frames << ", round trip exact: " << (same_roundtrip && same_tensors);
}

// 8. The HTTP service serves the same bytes the CLI writes.
void service_equivalence(const Settings& s, Outcome& o) {
    const fs::path dir = s.workdir / "service";
    fs::create_directories(dir);
    const fs::path data = s.workdir / "cli" / "data";
    const fs::path ckpt = s.workdir / "cli" / "model.ckpt";
    if (!fs::exists(ckpt)) make_cli_artifacts(s);
    const LightFieldDataset ds = load_dataset(data);
    const Model model = load_model(ckpt);
    ServiceConfig config;
    config.port = 0;
    config.max_concurrent = 16;
    FrameService service(ds, model, config);
    const int port = service.bind();
    std::thread server([&] { service.listen(); });

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::array<std::string, 3>> coords(10);
    for (auto& c : coords) c = {number(unit(rng)), number(unit(rng)), number(unit(rng))};
    auto query = [](const std::array<std::string, 3>& c) {
        return "/frame?u=" + c[0] + "&v=" + c[1] + "&t=" + c[2];
    };

    std::vector<std::string> expected;
    int sequential_matches = 0;
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(120);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const fs::path out = dir / ("cli_" + std::to_string(i) + ".ppm");
        require_cli(s, {"render", "--ckpt", ckpt.string(), "--data", data.string(), "-u", coords[i][0], "-v",
                        coords[i][1], "-t", coords[i][2], "--out", out.string()},
                    dir / "render.log");
        expected.push_back(read_file(out));
        const auto res = client.Get(query(coords[i]));
        if (res && res->status == 200 && res->body == expected.back()) ++sequential_matches;
    }
    o.check(sequential_matches == 10, "service bytes differ from CLI output");

    int rejected = 0;
    for (const char* q : {"/frame?u=1.5&v=0.5&t=0.5", "/frame?u=0.5&v=-0.1&t=0.5", "/frame?u=0.5&v=0.5&t=2",
                          "/frame?u=0.5&v=0.5&t=nan"}) {
        const auto res = client.Get(q);
        if (res && res->status == 400) ++rejected;
    }
    o.check(rejected == 4, "out-of-range request not rejected with 400");

    std::vector<std::string> bodies(coords.size());
    std::vector<std::thread> clients;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        clients.emplace_back([&, i] {
            httplib::Client c("127.0.0.1", port);
            c.set_read_timeout(120);
            if (const auto res = c.Get(query(coords[i])); res && res->status == 200) bodies[i] = res->body;
        });
    }
    for (auto& t : clients) t.join();
    int concurrent_matches = 0;
    for (std::size_t i = 0; i < coords.size(); ++i) concurrent_matches += bodies[i] == expected[i];
    o.check(concurrent_matches == 10, "concurrent frames incorrect");
    service.stop();
    server.join();
    o.detail << "sequential matches " << sequential_matches << "/10, out-of-range 400s " << rejected
             << "/4, concurrent matches " << concurrent_matches << "/10";
}

// 9. Render timing breakdown adds up.
void bench_instrumentation(const Settings& s, Outcome& o) {
    const SceneSpec spec = two_layer_scene(64, 3);
    const LightFieldDataset ds = generate_synthetic(spec);
    ViewSet views(ds, {});
    DecoderConfig dc;
    const Decoder decoder = Decoder::init(dc);
    const DecoderGeometry geometry(decoder);
    RenderContext ctx{&views, &geometry, nullptr};
    const TimingStats t = bench_render(ctx, 50, 1);
    const double parts = t.mean_decode_ms + t.mean_warp_ms;
    o.check(t.samples == 50 && t.mean_ms > 0.0, "no timing");
    o.check(parts <= t.mean_ms && parts >= 0.95 * t.mean_ms, "breakdown not within 5% of total");

    const fs::path dir = s.workdir / "bench";
    fs::create_directories(dir);
    const fs::path ckpt = s.workdir / "cli" / "model.ckpt";
    if (!fs::exists(ckpt)) make_cli_artifacts(s);
    require_cli(s, {"bench", "--ckpt", ckpt.string(), "--data", (s.workdir / "cli" / "data").string(), "-n", "50"},
                dir / "bench.log");
    const std::string log = read_file(dir / "bench.log");
    o.check(log.find("mean ") != std::string::npos && log.find("p95 ") != std::string::npos &&
                log.find("decode ") != std::string::npos,
            "CLI bench output lacks mean/p95/breakdown");
    o.detail << std::fixed << std::setprecision(2) << "64x64 base-128 decoder, n=50: mean " << t.mean_ms
             << " ms (p95 " << t.p95_ms << "), decode " << t.mean_decode_ms << " + warp " << t.mean_warp_ms << " = "
             << parts << " ms (" << std::setprecision(1) << 100.0 * parts / t.mean_ms << "% of total)";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nlfv acceptance criteria"};
    Settings settings;
    std::vector<int> only;
    app.add_option("--cli", settings.cli, "Path to the nlfv executable")->required();
    app.add_option("--workdir", settings.workdir, "Scratch directory");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);
    settings.only = {only.begin(), only.end()};
    const bool own_workdir = settings.workdir.empty();
    if (own_workdir) {
        settings.workdir = fs::temp_directory_path() / ("nlfv_acceptance_" + std::to_string(::getpid()));
    }
    fs::create_directories(settings.workdir);

    const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
        {"gradient integrity", gradient_integrity},
        {"warp oracle", warp_oracle},
        {"partition of unity and mode equivalence", partition_of_unity},
        {"spatial training ordering", spatial_training},
        {"temporal training", temporal_training},
        {"sparsity trend", sparsity_trend},
        {"determinism and persistence", [&](Outcome& o) { determinism(settings, o); }},
        {"service equivalence", [&](Outcome& o) { service_equivalence(settings, o); }},
        {"bench instrumentation", [&](Outcome& o) { bench_instrumentation(settings, o); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!settings.only.empty() && !settings.only.contains(id)) continue;
        Outcome outcome;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(outcome);
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail << "[exception: " << e.what() << "]";
        }
        failures += outcome.pass ? 0 : 1;
        std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): "
                  << outcome.detail.str() << " [" << std::fixed << std::setprecision(1) << seconds_since(start)
                  << " s]" << std::endl;
    }
    if (own_workdir) {
        std::error_code ec;
        fs::remove_all(settings.workdir, ec);
    }
    return failures == 0 ? 0 : 1;
}

} // namespace nlfv::acceptance

int main(int argc, char** argv) { return nlfv::acceptance::main(argc, argv); }
