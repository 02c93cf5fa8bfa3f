// Command-line surface for the pipeline: estimate, synth, eval and overlay
// subcommands. JSON results go to stdout, diagnostics to stderr.
//
// Exit codes: 0 success, 1 I/O or parse errors, 2 object not localised
// ("no object" or a degenerate baseline), 3 localised but no circumference
// converged.

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lode/lode.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitNoObject = 2;
constexpr int kExitNoConverged = 3;

lode::FitParams params_or_default(const std::string& path) {
    return path.empty() ? lode::default_params() : lode::load_params(path);
}

struct EstimateOptions {
    std::string calib, mask1, mask2, params, out;
};

int run_estimate(const EstimateOptions& opt) {
    const auto cams = lode::load_camera_pair(opt.calib);
    const lode::Mask m1 = lode::load_mask(opt.mask1);
    const lode::Mask m2 = lode::load_mask(opt.mask2);
    const lode::FitParams params = params_or_default(opt.params);

    const lode::ObjectEstimate est = lode::fit(cams[0], cams[1], m1, m2, params);

    nlohmann::json result;
    result["centroid_mm"] = {est.centroid_mm.x(), est.centroid_mm.y(), est.centroid_mm.z()};
    result["width_mm"] = est.width_mm;
    result["height_mm"] = est.height_mm;
    result["converged"] = est.converged_count;
    result["iterations"] = est.iterations;

    const std::string text = result.dump();
    std::cout << text << "\n";
    if (!opt.out.empty()) {
        std::ofstream out(opt.out, std::ios::binary);
        if (!out)
            throw lode::IoError("cannot open output file: " + opt.out);
        out << text << "\n";
    }
    return kExitOk;
}

struct SynthOptions {
    std::string calib, shape, outdir, noise;
    std::uint32_t seed = 0;
    bool seed_given = false;
};

lode::NoiseParams load_noise(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw lode::IoError("cannot open noise file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw lode::IoError("noise parse error: " + std::string(e.what()));
    }
    lode::NoiseParams noise;
    try {
        if (doc.contains("boundary_flip_prob"))
            noise.boundary_flip_prob = doc.at("boundary_flip_prob").get<double>();
        if (doc.contains("dilation_px"))
            noise.dilation_px = doc.at("dilation_px").get<int>();
        if (doc.contains("seed"))
            noise.seed = doc.at("seed").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
        throw lode::IoError("noise parse error: " + std::string(e.what()));
    }
    return noise;
}

int run_synth(const SynthOptions& opt) {
    const auto cams = lode::load_calibration(opt.calib);
    const lode::RevolutionShape shape = lode::load_shape(opt.shape);

    lode::NoiseParams noise;
    bool apply_noise = false;
    if (!opt.noise.empty()) {
        noise = load_noise(opt.noise);
        apply_noise = true;
    }
    if (opt.seed_given) {
        noise.seed = opt.seed;
        apply_noise = apply_noise || noise.boundary_flip_prob > 0.0 || noise.dilation_px != 0;
    }

    std::error_code ec;
    std::filesystem::create_directories(opt.outdir, ec);
    const std::filesystem::path outdir(opt.outdir);

    for (const lode::CalibratedCamera& cam : cams) {
        const lode::DepthMap depth = lode::render_depth(cam, shape);
        lode::Mask mask = lode::make_mask(depth.width, depth.height);
        for (std::size_t i = 0; i < depth.data.size(); ++i)
            mask.data[i] = depth.data[i] > 0.0 ? 1 : 0;
        if (apply_noise)
            mask = lode::perturb_mask(mask, noise);

        lode::save_mask(mask, (outdir / ("mask_" + cam.id + ".pgm")).string());
        lode::save_depth(depth, (outdir / ("depth_" + cam.id + ".pgm")).string());
    }
    return kExitOk;
}

struct EvalOptions {
    std::string manifest, report, params;
};

int run_eval(const EvalOptions& opt) {
    const lode::FitParams params = params_or_default(opt.params);
    const int threads = std::max(1u, std::thread::hardware_concurrency());
    const lode::Report report = lode::run_manifest(opt.manifest, params, threads);
    lode::write_report(report, opt.report);
    // Individual configuration failures are data, not process errors.
    return kExitOk;
}

struct OverlayOptions {
    std::string calib, mask1, mask2, out_prefix, params;
};

struct Rgb {
    std::uint8_t r, g, b;
};

void write_overlay(const std::string& path, const lode::Mask& mask,
                   const lode::CalibratedCamera& cam, const lode::Mask& other_mask,
                   const lode::CalibratedCamera& other_cam, const lode::FitReport& fitted,
                   int points_per_circ) {
    static_cast<void>(other_mask);
    static_cast<void>(other_cam);

    std::vector<Rgb> image(static_cast<std::size_t>(mask.width) * mask.height);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        const std::uint8_t g = mask.data[i] ? 255 : 0;
        image[i] = {g, g, g};
    }

    const Eigen::Vector2d centre_xy(fitted.centroid.x(), fitted.centroid.y());
    constexpr Rgb kRed{255, 0, 0};    // outside this camera's mask
    constexpr Rgb kBlue{0, 0, 255};   // inside the mask, circumference not converged
    constexpr Rgb kGreen{0, 255, 0};  // circumference fits the shape in both cameras

    for (const lode::Circumference& circ : fitted.model.circumferences) {
        const auto points = lode::sample_circumference(circ, centre_xy, points_per_circ);
        for (const Eigen::Vector3d& p : points) {
            Eigen::Vector2d px;
            try {
                px = lode::project(cam, p);
            } catch (const lode::BehindCameraError&) {
                continue;
            }
            const int u = static_cast<int>(std::lround(px.x()));
            const int v = static_cast<int>(std::lround(px.y()));
            if (!mask.in_bounds(u, v))
                continue;
            Rgb colour = kRed;
            if (circ.converged)
                colour = kGreen;
            else if (lode::mask_contains(mask, px))
                colour = kBlue;
            image[static_cast<std::size_t>(v) * mask.width + u] = colour;
        }
    }

    auto out = lode::pnm::open_output(path);
    lode::pnm::write_header(out, "P6", mask.width, mask.height, 255);
    out.write(reinterpret_cast<const char*>(image.data()),
              static_cast<std::streamsize>(image.size() * sizeof(Rgb)));
    if (!out)
        throw lode::IoError("failed to write overlay: " + path);
}

int run_overlay(const OverlayOptions& opt) {
    const auto cams = lode::load_camera_pair(opt.calib);
    const lode::Mask m1 = lode::load_mask(opt.mask1);
    const lode::Mask m2 = lode::load_mask(opt.mask2);
    const lode::FitParams params = params_or_default(opt.params);

    const lode::FitReport fitted = lode::fit_detailed(cams[0], cams[1], m1, m2, params);

    write_overlay(opt.out_prefix + "_" + cams[0].id + ".ppm", m1, cams[0], m2, cams[1], fitted,
                  params.points_per_circumference);
    write_overlay(opt.out_prefix + "_" + cams[1].id + ".ppm", m2, cams[1], m1, cams[0], fitted,
                  params.points_per_circumference);

    if (fitted.converged_count == 0) {
        std::cerr << "error: no converged circumference\n";
        return kExitNoConverged;
    }
    return kExitOk;
}

template <typename F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const lode::NoObjectError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoObject;
    } catch (const lode::DegenerateBaselineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoObject;
    } catch (const lode::NoConvergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoConverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Localisation and dimension estimation of rotationally "
                 "symmetric containers from two calibrated views"};
    app.require_subcommand(1);

    EstimateOptions est;
    CLI::App* cmd_estimate = app.add_subcommand("estimate", "Fit one mask pair");
    cmd_estimate->add_option("--calib", est.calib, "Calibration JSON")->required();
    cmd_estimate->add_option("--mask1", est.mask1, "Mask PGM, camera 1")->required();
    cmd_estimate->add_option("--mask2", est.mask2, "Mask PGM, camera 2")->required();
    cmd_estimate->add_option("--params", est.params, "Fit params JSON override");
    cmd_estimate->add_option("--out", est.out, "Write the result JSON here too");

    SynthOptions syn;
    CLI::App* cmd_synth = app.add_subcommand("synth", "Render masks and depth maps");
    cmd_synth->add_option("--calib", syn.calib, "Calibration JSON")->required();
    cmd_synth->add_option("--shape", syn.shape, "Shape JSON")->required();
    cmd_synth->add_option("--outdir", syn.outdir, "Output directory")->required();
    cmd_synth->add_option("--noise", syn.noise, "Mask noise JSON");
    CLI::Option* seed_opt = cmd_synth->add_option("--seed", syn.seed, "Noise RNG seed");

    EvalOptions evl;
    CLI::App* cmd_eval = app.add_subcommand("eval", "Run a manifest and write reports");
    cmd_eval->add_option("--manifest", evl.manifest, "Manifest JSON")->required();
    cmd_eval->add_option("--report", evl.report, "Report CSV path")->required();
    cmd_eval->add_option("--params", evl.params, "Fit params JSON override");

    OverlayOptions ovl;
    CLI::App* cmd_overlay = app.add_subcommand("overlay", "Render fit diagnostics as PPM");
    cmd_overlay->add_option("--calib", ovl.calib, "Calibration JSON")->required();
    cmd_overlay->add_option("--mask1", ovl.mask1, "Mask PGM, camera 1")->required();
    cmd_overlay->add_option("--mask2", ovl.mask2, "Mask PGM, camera 2")->required();
    cmd_overlay->add_option("--out-prefix", ovl.out_prefix, "Output file prefix")->required();
    cmd_overlay->add_option("--params", ovl.params, "Fit params JSON override");

    CLI11_PARSE(app, argc, argv);
    syn.seed_given = seed_opt->count() > 0;

    if (cmd_estimate->parsed())
        return guarded([&] { return run_estimate(est); });
    if (cmd_synth->parsed())
        return guarded([&] { return run_synth(syn); });
    if (cmd_eval->parsed())
        return guarded([&] { return run_eval(evl); });
    if (cmd_overlay->parsed())
        return guarded([&] { return run_overlay(ovl); });
    return kExitIo;
}
