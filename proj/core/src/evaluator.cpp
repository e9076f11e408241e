// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#include "nlfv/evaluator.hpp"

#include "nlfv/error.hpp"
#include "nlfv/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace nlfv {
namespace {

constexpr std::string_view kCsvHeader = "method,i,j,k,u,v,t,l2,dssim,psnr";
constexpr std::string_view kMetricNote = "metrics: L2 (MSE), DSSIM, PSNR; VGG perceptual metric dropped (not computed)";

std::string fmt(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
    T value{};
    const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
    if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
        throw LoadError("report: bad " + std::string(what) + " '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            return out;
        }
        start = pos + 1;
    }
}

// "key=value" fields of a '#' comment line.
std::map<std::string, std::string, std::less<>> comment_fields(std::string_view line) {
    std::map<std::string, std::string, std::less<>> out;
    for (auto field : split(line, ' ')) {
        if (field.ends_with(';')) {
            field.remove_suffix(1);
        }
        const auto eq = field.find('=');
        if (eq != std::string_view::npos) {
            out.emplace(std::string(field.substr(0, eq)), std::string(field.substr(eq + 1)));
        }
    }
    return out;
}

bool needs_geometry(const RenderMode& mode) {
    return mode.kind == RenderModeKind::Full || mode.kind == RenderModeKind::NoOcclusion ||
           mode.kind == RenderModeKind::DownUp;
}

nlohmann::json timing_to_json(const TimingStats& t) {
    return {{"samples", t.samples},         {"mean_ms", t.mean_ms},
            {"p95_ms", t.p95_ms},           {"min_ms", t.min_ms},
            {"max_ms", t.max_ms},           {"stddev_ms", t.stddev_ms},
            {"mean_decode_ms", t.mean_decode_ms}, {"mean_warp_ms", t.mean_warp_ms}};
}

TimingStats timing_from_json(const nlohmann::json& j) {
    TimingStats t;
    t.samples = j.at("samples").get<std::size_t>();
    t.mean_ms = j.at("mean_ms").get<double>();
    t.p95_ms = j.at("p95_ms").get<double>();
    t.min_ms = j.at("min_ms").get<double>();
    t.max_ms = j.at("max_ms").get<double>();
    t.stddev_ms = j.at("stddev_ms").get<double>();
    t.mean_decode_ms = j.at("mean_decode_ms").get<double>();
    t.mean_warp_ms = j.at("mean_warp_ms").get<double>();
    return t;
}

} // namespace

std::vector<MethodSummary> EvalReport::summary() const {
    std::vector<MethodSummary> out;
    for (const auto& row : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const MethodSummary& s) { return s.method == row.method; });
        if (it == out.end()) {
            out.push_back({row.method});
            it = out.end() - 1;
        }
        ++it->count;
        it->mean_l2 += row.l2;
        it->mean_dssim += row.dssim;
        it->mean_psnr += row.psnr;
    }
    for (auto& s : out) {
        const double n = static_cast<double>(s.count);
        s.mean_l2 /= n;
        s.mean_dssim /= n;
        s.mean_psnr /= n;
    }
    return out;
}

MethodSummary EvalReport::method(const std::string& name) const {
    for (const auto& s : summary()) {
        if (s.method == name) {
            return s;
        }
    }
    throw UsageError("report has no method '" + name + "'");
}

std::string EvalReport::file_stem() const { return scene + "_seed" + std::to_string(seed); }

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "# nlfv report scene=" << scene << " seed=" << seed << "; " << kMetricNote << '\n';
    if (timing) {
        const auto& t = *timing;
        out << "# timing samples=" << t.samples << " mean_ms=" << fmt(t.mean_ms) << " p95_ms=" << fmt(t.p95_ms)
            << " min_ms=" << fmt(t.min_ms) << " max_ms=" << fmt(t.max_ms) << " stddev_ms=" << fmt(t.stddev_ms)
            << " mean_decode_ms=" << fmt(t.mean_decode_ms) << " mean_warp_ms=" << fmt(t.mean_warp_ms) << '\n';
    }
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.method << ',' << r.index.i << ',' << r.index.j << ',' << r.index.k << ',' << fmt(r.coordinate.u)
            << ',' << fmt(r.coordinate.v) << ',' << fmt(r.coordinate.t) << ',' << fmt(r.l2) << ','
            << fmt(r.dssim) << ',' << fmt(r.psnr) << '\n';
    }
    return out.str();
}

EvalReport EvalReport::from_csv(std::string_view text) {
    EvalReport report;
    bool header_seen = false;
    for (auto line : split(text, '\n')) {
        if (line.ends_with('\r')) {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        if (line.starts_with("# nlfv report")) {
            const auto fields = comment_fields(line);
            if (const auto it = fields.find("scene"); it != fields.end()) report.scene = it->second;
            if (const auto it = fields.find("seed"); it != fields.end())
                report.seed = parse_number<std::uint64_t>(it->second, "seed");
            continue;
        }
        if (line.starts_with("# timing")) {
            const auto f = comment_fields(line);
            auto get = [&](const char* key) -> const std::string& {
                const auto it = f.find(key);
                if (it == f.end()) {
                    throw LoadError(std::string("report timing line lacks ") + key);
                }
                return it->second;
            };
            TimingStats t;
            t.samples = parse_number<std::size_t>(get("samples"), "samples");
            t.mean_ms = parse_number<double>(get("mean_ms"), "mean_ms");
            t.p95_ms = parse_number<double>(get("p95_ms"), "p95_ms");
            t.min_ms = parse_number<double>(get("min_ms"), "min_ms");
            t.max_ms = parse_number<double>(get("max_ms"), "max_ms");
            t.stddev_ms = parse_number<double>(get("stddev_ms"), "stddev_ms");
            t.mean_decode_ms = parse_number<double>(get("mean_decode_ms"), "mean_decode_ms");
            t.mean_warp_ms = parse_number<double>(get("mean_warp_ms"), "mean_warp_ms");
            report.timing = t;
            continue;
        }
        if (line.starts_with('#')) {
            continue;
        }
        if (line == kCsvHeader) {
            header_seen = true;
            continue;
        }
        if (!header_seen) {
            throw LoadError("report: missing CSV header '" + std::string(kCsvHeader) + "'");
        }
        const auto cells = split(line, ',');
        if (cells.size() != 10) {
            throw LoadError("report: expected 10 columns, got " + std::to_string(cells.size()));
        }
        EvalRow row;
        row.method = std::string(cells[0]);
        row.index = {parse_number<int>(cells[1], "i"), parse_number<int>(cells[2], "j"),
                     parse_number<int>(cells[3], "k")};
        row.coordinate = {parse_number<double>(cells[4], "u"), parse_number<double>(cells[5], "v"),
                          parse_number<double>(cells[6], "t")};
        row.l2 = parse_number<double>(cells[7], "l2");
        row.dssim = parse_number<double>(cells[8], "dssim");
        row.psnr = parse_number<double>(cells[9], "psnr");
        report.rows.push_back(std::move(row));
    }
    return report;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
        rows_json.push_back({{"method", r.method},
                             {"index", {r.index.i, r.index.j, r.index.k}},
                             {"coordinate", {r.coordinate.u, r.coordinate.v, r.coordinate.t}},
                             {"l2", r.l2},
                             {"dssim", r.dssim},
                             {"psnr", r.psnr}});
    }
    nlohmann::json summary_json = nlohmann::json::array();
    for (const auto& s : summary()) {
        summary_json.push_back({{"method", s.method},
                                {"count", s.count},
                                {"mean_l2", s.mean_l2},
                                {"mean_dssim", s.mean_dssim},
                                {"mean_psnr", s.mean_psnr}});
    }
    return {{"scene", scene},
            {"seed", seed},
            {"note", kMetricNote},
            {"rows", rows_json},
            {"summary", summary_json},
            {"timing", timing ? timing_to_json(*timing) : nlohmann::json(nullptr)}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport report;
    try {
        report.scene = j.at("scene").get<std::string>();
        report.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& r : j.at("rows")) {
            EvalRow row;
            row.method = r.at("method").get<std::string>();
            const auto& idx = r.at("index");
            row.index = {idx.at(0).get<int>(), idx.at(1).get<int>(), idx.at(2).get<int>()};
            const auto& c = r.at("coordinate");
            row.coordinate = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
            row.l2 = r.at("l2").get<double>();
            row.dssim = r.at("dssim").get<double>();
            row.psnr = r.at("psnr").get<double>();
            report.rows.push_back(std::move(row));
        }
        if (j.contains("timing") && !j.at("timing").is_null()) {
            report.timing = timing_from_json(j.at("timing"));
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("malformed report JSON: ") + e.what());
    }
    return report;
}

EvalReport evaluate_holdout(const LightFieldDataset& dataset, const std::set<GridIndex>& holdout,
                            const RenderContext& context, std::span<const RenderMode> methods, std::uint64_t seed) {
    if (holdout.empty()) {
        throw UsageError("dataset has no holdout; train with --holdout center-view (or another pattern) first");
    }
    if (methods.empty()) {
        throw UsageError("no methods to evaluate");
    }
    if (context.views == nullptr) {
        throw UsageError("evaluate_holdout: no observed views");
    }
    for (const auto& h : holdout) {
        if (!context.views->excluded().contains(h)) {
            throw UsageError("holdout " + to_string(h) + " is visible to the renderer");
        }
    }
    for (const auto& m : methods) {
        if (needs_geometry(m) && context.geometry == nullptr) {
            throw UsageError("method '" + m.name() + "' requires a trained model; run train first");
        }
        if (m.kind == RenderModeKind::NoWarp && context.color_decoder == nullptr) {
            throw UsageError("method 'no-warp' requires a color decoder; train with --with-color-baseline");
        }
    }
    EvalReport report;
    report.scene = dataset.scene;
    report.seed = seed;
    for (const auto& m : methods) {
        for (const auto& h : holdout) {
            const LFCoordinate x = dataset.coordinate(h);
            const Image rendered = render(context, x, m);
            const Image& truth = dataset.image(h);
            const double l2 = mse(rendered, truth);
            report.rows.push_back({m.name(), h, x, l2, dssim(rendered, truth), psnr_from_mse(l2)});
        }
    }
    return report;
}

std::vector<SweepEntry> sparsity_sweep(const SceneSpec& spec, const SweepOptions& options) {
    std::vector<SweepEntry> out;
    for (int grid : options.grids) {
        if (grid < 3 || grid % 2 == 0) {
            throw ConfigError("sparsity sweep grids must be odd and >= 3, got " + std::to_string(grid));
        }
        SceneSpec s = spec;
        s.grid_m = grid;
        s.grid_n = grid;
        const LightFieldDataset dataset = generate_synthetic(s);
        HoldoutSpec holdout;
        holdout.pattern = HoldoutPattern::CenterView;
        const HoldoutSplit split = holdout_split(dataset, holdout);
        DecoderConfig decoder = options.decoder;
        decoder.width = dataset.width;
        decoder.height = dataset.height;
        decoder.mode = DecoderMode::Geometry;

        const auto start = std::chrono::steady_clock::now();
        const TrainResult trained = train(dataset, split, decoder, options.train);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        const ViewSet views(dataset, split.holdout);
        const DecoderGeometry geometry(trained.decoder);
        RenderContext context;
        context.views = &views;
        context.geometry = &geometry;
        context.kappa = options.train.kappa;
        const GridIndex target{(grid - 1) / 2, (grid - 1) / 2, 0};
        const Image rendered = render(context, dataset.coordinate(target), RenderMode{});
        out.push_back({grid, target, mse(rendered, dataset.image(target)), dssim(rendered, dataset.image(target)),
                       seconds});
    }
    return out;
}

TimingStats bench_render(const RenderContext& context, int n, std::uint64_t seed) {
    if (n <= 0) {
        throw UsageError("bench_render needs n >= 1, got " + std::to_string(n));
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> totals;
    double decode = 0.0;
    double warp_time = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = unit(rng);
        const double v = unit(rng);
        const double t = unit(rng);
        RenderTiming timing;
        render(context, {u, v, t}, RenderMode{}, &timing);
        totals.push_back(timing.total_seconds * 1e3);
        decode += timing.decode_seconds * 1e3;
        warp_time += timing.warp_seconds * 1e3;
    }
    TimingStats stats;
    stats.samples = totals.size();
    double sum = 0.0;
    for (double v : totals) {
        sum += v;
    }
    stats.mean_ms = sum / n;
    double var = 0.0;
    for (double v : totals) {
        var += (v - stats.mean_ms) * (v - stats.mean_ms);
    }
    stats.stddev_ms = std::sqrt(var / n);
    std::vector<double> sorted = totals;
    std::sort(sorted.begin(), sorted.end());
    stats.min_ms = sorted.front();
    stats.max_ms = sorted.back();
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * n));
    stats.p95_ms = sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
    stats.mean_decode_ms = decode / n;
    stats.mean_warp_ms = warp_time / n;
    return stats;
}

} // namespace nlfv
