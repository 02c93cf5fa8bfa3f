#pragma once

// Batch evaluation over configuration manifests: localisation success ratio,
// dimension-error statistics, the depth-back-projection baseline and report
// emission (CSV rows plus a JSON summary sidecar).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lode/camera.hpp"
#include "lode/errors.hpp"
#include "lode/fitting.hpp"
#include "lode/mask.hpp"
#include "lode/synth.hpp"

namespace lode {

/// One evaluation case: a calibration, two masks, optional per-camera depth
/// maps and the annotated ground-truth dimensions.
struct Configuration {
    std::string id;
    std::string calib;
    std::array<std::string, 2> masks;
    std::array<std::string, 2> depths; // empty string = not provided
    double gt_w_mm = 0.0;
    double gt_h_mm = 0.0;
    std::vector<std::string> tags;
};

struct ErrorStats {
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

/// 100 * successes / total.
inline double lsr(std::int64_t successes, std::int64_t total) {
    if (total <= 0)
        throw Error("localisation success ratio needs a positive total");
    return 100.0 * static_cast<double>(successes) / static_cast<double>(total);
}

namespace detail {

// Percentile by linear interpolation between closest ranks over a sorted
// ascending sample.
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    if (lo + 1 >= sorted.size())
        return sorted.back();
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double round2(double x) { return std::round(x * 100.0) / 100.0; }

// Rounds through the exact decimal string written to the CSV, so aggregates
// recomputed from the emitted file match the summary bit for bit.
inline double quantize_mm(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", x);
    return std::strtod(buf, nullptr);
}

inline std::string format_mm(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", x);
    return buf;
}

} // namespace detail

/// Median/min/max/quartiles with percentiles by linear interpolation between
/// closest ranks.
inline ErrorStats error_stats(std::vector<double> values) {
    if (values.empty())
        throw Error("error stats need a non-empty sample");
    std::sort(values.begin(), values.end());
    ErrorStats s;
    s.min = values.front();
    s.max = values.back();
    s.q25 = detail::percentile_sorted(values, 25.0);
    s.median = detail::percentile_sorted(values, 50.0);
    s.q75 = detail::percentile_sorted(values, 75.0);
    return s;
}

/// Depth baseline: back-projects every pixel with mask = 1 and depth > 0 to
/// camera coordinates and takes the extent of the extremal x and y values.
inline std::pair<double, double> segdd_estimate(const Mask& mask, const DepthMap& depth,
                                                const CalibratedCamera& cam) {
    if (mask.width != depth.width || mask.height != depth.height)
        throw Error("mask and depth dimensions differ");

    double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
    bool any = false;
    for (int v = 0; v < mask.height; ++v) {
        for (int u = 0; u < mask.width; ++u) {
            if (!mask.at(u, v))
                continue;
            const double z = depth.at(u, v);
            if (!(z > 0.0))
                continue;
            const double x = (u - cam.intrinsics.cx) * z / cam.intrinsics.fx;
            const double y = (v - cam.intrinsics.cy) * z / cam.intrinsics.fy;
            if (!any) {
                x_min = x_max = x;
                y_min = y_max = y;
                any = true;
            } else {
                x_min = std::min(x_min, x);
                x_max = std::max(x_max, x);
                y_min = std::min(y_min, y);
                y_max = std::max(y_max, y);
            }
        }
    }
    if (!any)
        throw NoObjectError();
    return {x_max - x_min, y_max - y_min};
}

/// Per-configuration fit outcome. Dimensions and errors are present only
/// when the fit produced them; values are quantized to what the CSV carries.
struct ConfigOutcome {
    std::string id;
    bool success = false; // centroid localised
    std::optional<double> w_mm, h_mm, err_w_mm, err_h_mm;
    int iterations = 0;
    std::string reason; // empty on full success
    std::vector<std::string> tags;
};

/// Per-camera row of the depth baseline.
struct SegddOutcome {
    std::string id;
    std::string camera;
    bool success = false;
    std::optional<double> w_mm, h_mm, err_w_mm, err_h_mm;
    std::string reason;
};

struct GroupStats {
    std::int64_t total = 0;
    std::int64_t successes = 0;
    double lsr_percent = 0.0;
    std::optional<ErrorStats> width_error_mm;
    std::optional<ErrorStats> height_error_mm;
};

struct Report {
    std::vector<ConfigOutcome> rows;      // manifest order
    std::vector<SegddOutcome> segdd_rows; // manifest order, then camera order
    GroupStats overall;
    std::map<std::string, GroupStats> per_tag;
};

namespace detail {

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path fp(p);
    if (fp.is_absolute())
        return fp.string();
    return (base / fp).string();
}

inline std::vector<Configuration> parse_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open manifest: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw IoError("manifest parse error: " + std::string(e.what()));
    }

    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::vector<Configuration> configs;
    try {
        for (const auto& jc : doc.at("configurations")) {
            Configuration cfg;
            cfg.id = jc.at("id").get<std::string>();
            cfg.calib = resolve_path(base, jc.at("calib").get<std::string>());
            const auto& jm = jc.at("masks");
            if (jm.size() != 2)
                throw IoError("manifest parse error: configuration '" + cfg.id +
                              "' must list exactly 2 masks");
            cfg.masks[0] = resolve_path(base, jm.at(0).get<std::string>());
            cfg.masks[1] = resolve_path(base, jm.at(1).get<std::string>());
            if (jc.contains("depth")) {
                const auto& jd = jc.at("depth");
                if (jd.is_string()) {
                    cfg.depths[0] = resolve_path(base, jd.get<std::string>());
                } else {
                    if (jd.size() > 2)
                        throw IoError("manifest parse error: configuration '" + cfg.id +
                                      "' lists more than 2 depth maps");
                    for (std::size_t i = 0; i < jd.size(); ++i)
                        if (!jd.at(i).is_null())
                            cfg.depths[i] = resolve_path(base, jd.at(i).get<std::string>());
                }
            }
            cfg.gt_w_mm = jc.at("gt_w_mm").get<double>();
            cfg.gt_h_mm = jc.at("gt_h_mm").get<double>();
            if (!(cfg.gt_w_mm > 0.0) || !(cfg.gt_h_mm > 0.0))
                throw IoError("manifest parse error: configuration '" + cfg.id +
                              "' needs positive ground truth");
            if (jc.contains("tags"))
                for (const auto& jt : jc.at("tags"))
                    cfg.tags.push_back(jt.get<std::string>());
            configs.push_back(std::move(cfg));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("manifest parse error: " + std::string(e.what()));
    }
    if (configs.empty())
        throw IoError("empty manifest: " + path);
    return configs;
}

inline void run_configuration(const Configuration& cfg, const FitParams& params,
                              ConfigOutcome& row, std::vector<SegddOutcome>& segdd_rows) {
    row.id = cfg.id;
    row.tags = cfg.tags;

    std::array<CalibratedCamera, 2> cams;
    std::array<Mask, 2> masks;
    bool inputs_ok = false;
    try {
        cams = load_camera_pair(cfg.calib);
        masks[0] = load_mask(cfg.masks[0]);
        masks[1] = load_mask(cfg.masks[1]);
        inputs_ok = true;

        const ObjectEstimate est = fit(cams[0], cams[1], masks[0], masks[1], params);
        row.success = true;
        row.iterations = est.iterations;
        row.w_mm = quantize_mm(est.width_mm);
        row.h_mm = quantize_mm(est.height_mm);
        row.err_w_mm = quantize_mm(std::abs(est.width_mm - cfg.gt_w_mm));
        row.err_h_mm = quantize_mm(std::abs(est.height_mm - cfg.gt_h_mm));
    } catch (const NoConvergedError& e) {
        row.success = true; // localised, dimensions undefined
        row.iterations = e.iterations();
        row.reason = e.what();
    } catch (const std::exception& e) {
        row.success = false;
        row.reason = e.what();
    }

    // Depth baseline rows, one per camera with a depth map.
    for (int c = 0; c < 2; ++c) {
        if (cfg.depths[c].empty())
            continue;
        SegddOutcome seg;
        seg.id = cfg.id;
        seg.camera = inputs_ok ? cams[c].id : ("cam" + std::to_string(c + 1));
        try {
            if (!inputs_ok)
                throw Error("configuration inputs failed to load");
            const DepthMap depth = load_depth(cfg.depths[c]);
            const auto [w, h] = segdd_estimate(masks[c], depth, cams[c]);
            seg.success = true;
            seg.w_mm = quantize_mm(w);
            seg.h_mm = quantize_mm(h);
            seg.err_w_mm = quantize_mm(std::abs(w - cfg.gt_w_mm));
            seg.err_h_mm = quantize_mm(std::abs(h - cfg.gt_h_mm));
        } catch (const std::exception& e) {
            seg.success = false;
            seg.reason = e.what();
        }
        segdd_rows.push_back(std::move(seg));
    }
}

inline GroupStats aggregate(const std::vector<const ConfigOutcome*>& rows) {
    GroupStats g;
    g.total = static_cast<std::int64_t>(rows.size());
    std::vector<double> err_w, err_h;
    for (const ConfigOutcome* row : rows) {
        if (row->success)
            ++g.successes;
        if (row->err_w_mm)
            err_w.push_back(*row->err_w_mm);
        if (row->err_h_mm)
            err_h.push_back(*row->err_h_mm);
    }
    g.lsr_percent = round2(lsr(g.successes, g.total));
    if (!err_w.empty())
        g.width_error_mm = error_stats(err_w);
    if (!err_h.empty())
        g.height_error_mm = error_stats(err_h);
    return g;
}

} // namespace detail

/// Recomputes all aggregates from the rows; pure, usable to cross-check an
/// emitted report.
inline void aggregate_report(Report& report) {
    std::vector<const ConfigOutcome*> all;
    std::map<std::string, std::vector<const ConfigOutcome*>> groups;
    for (const ConfigOutcome& row : report.rows) {
        all.push_back(&row);
        for (const std::string& tag : row.tags)
            groups[tag].push_back(&row);
    }
    report.overall = detail::aggregate(all);
    report.per_tag.clear();
    for (const auto& [tag, rows] : groups)
        report.per_tag[tag] = detail::aggregate(rows);
}

/// Runs the fit on every configuration. Per-configuration I/O problems are
/// recorded as failure rows, never aborts. Rows keep manifest order whatever
/// the thread count.
inline Report run_manifest(const std::string& manifest_path, const FitParams& params,
                           int threads = 1) {
    validate(params);
    const std::vector<Configuration> configs = detail::parse_manifest(manifest_path);

    Report report;
    report.rows.resize(configs.size());
    std::vector<std::vector<SegddOutcome>> segdd(configs.size());

    const int worker_count =
        std::max(1, std::min<int>(threads, static_cast<int>(configs.size())));
    if (worker_count == 1) {
        for (std::size_t i = 0; i < configs.size(); ++i)
            detail::run_configuration(configs[i], params, report.rows[i], segdd[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(worker_count));
        for (int w = 0; w < worker_count; ++w) {
            workers.emplace_back([&]() {
                for (std::size_t i = next.fetch_add(1); i < configs.size();
                     i = next.fetch_add(1))
                    detail::run_configuration(configs[i], params, report.rows[i], segdd[i]);
            });
        }
        for (auto& w : workers)
            w.join();
    }

    for (auto& rows : segdd)
        for (auto& row : rows)
            report.segdd_rows.push_back(std::move(row));

    aggregate_report(report);
    return report;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"')
            quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

inline std::string opt_mm(const std::optional<double>& v) {
    return v ? format_mm(*v) : std::string();
}

inline nlohmann::json stats_json(const std::optional<ErrorStats>& s) {
    if (!s)
        return nullptr;
    return {{"median", s->median}, {"min", s->min}, {"max", s->max},
            {"q25", s->q25},       {"q75", s->q75}};
}

inline nlohmann::json group_json(const GroupStats& g) {
    return {{"total", g.total},
            {"successes", g.successes},
            {"lsr_percent", g.lsr_percent},
            {"width_error_mm", stats_json(g.width_error_mm)},
            {"height_error_mm", stats_json(g.height_error_mm)}};
}

} // namespace detail

/// Writes the CSV (header id,success,w_mm,h_mm,err_w_mm,err_h_mm,iterations,
/// reason), the JSON summary sidecar <stem>.summary.json and, when depth
/// baseline rows exist, <stem>.segdd.csv.
inline void write_report(const Report& report, const std::string& csv_path) {
    {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out)
            throw IoError("cannot open report for writing: " + csv_path);
        out << "id,success,w_mm,h_mm,err_w_mm,err_h_mm,iterations,reason\n";
        for (const ConfigOutcome& row : report.rows) {
            out << detail::csv_field(row.id) << ',' << (row.success ? 1 : 0) << ','
                << detail::opt_mm(row.w_mm) << ',' << detail::opt_mm(row.h_mm) << ','
                << detail::opt_mm(row.err_w_mm) << ',' << detail::opt_mm(row.err_h_mm) << ','
                << row.iterations << ',' << detail::csv_field(row.reason) << '\n';
        }
        if (!out)
            throw IoError("failed to write report: " + csv_path);
    }

    std::filesystem::path stem(csv_path);
    stem.replace_extension();

    nlohmann::json summary;
    summary["percentile_rule"] = "linear interpolation between closest ranks";
    summary["total"] = report.overall.total;
    summary["successes"] = report.overall.successes;
    summary["lsr_percent"] = report.overall.lsr_percent;
    summary["width_error_mm"] = detail::stats_json(report.overall.width_error_mm);
    summary["height_error_mm"] = detail::stats_json(report.overall.height_error_mm);
    nlohmann::json tags = nlohmann::json::object();
    for (const auto& [tag, group] : report.per_tag)
        tags[tag] = detail::group_json(group);
    summary["tags"] = tags;

    {
        const std::string summary_path = stem.string() + ".summary.json";
        std::ofstream out(summary_path, std::ios::binary);
        if (!out)
            throw IoError("cannot open summary for writing: " + summary_path);
        out << summary.dump(2) << '\n';
    }

    if (!report.segdd_rows.empty()) {
        const std::string segdd_path = stem.string() + ".segdd.csv";
        std::ofstream out(segdd_path, std::ios::binary);
        if (!out)
            throw IoError("cannot open baseline report for writing: " + segdd_path);
        out << "id,camera,success,w_mm,h_mm,err_w_mm,err_h_mm,reason\n";
        for (const SegddOutcome& row : report.segdd_rows) {
            out << detail::csv_field(row.id) << ',' << detail::csv_field(row.camera) << ','
                << (row.success ? 1 : 0) << ',' << detail::opt_mm(row.w_mm) << ','
                << detail::opt_mm(row.h_mm) << ',' << detail::opt_mm(row.err_w_mm) << ','
                << detail::opt_mm(row.err_h_mm) << ',' << detail::csv_field(row.reason) << '\n';
        }
    }
}

} // namespace lode
