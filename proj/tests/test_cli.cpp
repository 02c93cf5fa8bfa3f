// End-to-end checks of the command-line tool: every subcommand, its exit
// codes and the determinism of its outputs. Run with the CLI binary path as
// the only argument.

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "lode/lode.hpp"

namespace {

int g_failures = 0;

#define CHECK_TRUE(cond)                                                       \
    do {                                                                       \
        if (!(cond)) {                                                         \
            ++g_failures;                                                      \
            std::printf("FAIL %s:%d: %s\n", __FILE__, __LINE__, #cond);        \
        }                                                                      \
    } while (0)

struct Ppm {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb;
};

Ppm read_ppm(const std::string& path) {
    auto in = lode::pnm::open_input(path);
    const lode::pnm::Header h = lode::pnm::read_header(in, "P6");
    Ppm img;
    img.width = h.width;
    img.height = h.height;
    img.rgb = lode::pnm::read_payload(in, static_cast<std::size_t>(h.width) * h.height * 3);
    return img;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::printf("usage: test_cli <path-to-cli>\n");
        return 2;
    }
    const std::string cli = argv[1];
    testutil::ScopedTempDir dir("cli");

    // Shared inputs: two-camera rig at 400 mm, 640x360, and a cylinder.
    const auto cams = testutil::fixture_cameras(400.0, 640, 360, 300.0);
    const std::string calib = dir.file("calib.json");
    testutil::write_text(calib, testutil::calibration_json({cams[0], cams[1]}));
    testutil::write_text(dir.file("shape.json"),
                         R"({"axis_base":[0,0,0],"profile":[[0,40],[120,40]]})");

    // --- synth ---------------------------------------------------------
    {
        const auto r = testutil::run_cli(
            cli, "synth --calib " + calib + " --shape " + dir.file("shape.json") +
                     " --outdir " + dir.file("out1"), dir);
        CHECK_TRUE(r.exit_code == 0);
        CHECK_TRUE(std::filesystem::exists(dir.file("out1/mask_c1.pgm")));
        CHECK_TRUE(std::filesystem::exists(dir.file("out1/mask_c2.pgm")));
        CHECK_TRUE(std::filesystem::exists(dir.file("out1/depth_c1.pgm")));
        CHECK_TRUE(std::filesystem::exists(dir.file("out1/depth_c2.pgm")));

        // same invocation with noise and a fixed seed, twice: bitwise equal
        testutil::write_text(dir.file("noise.json"),
                             R"({"boundary_flip_prob":0.3,"dilation_px":1})");
        const std::string noisy_args = "synth --calib " + calib + " --shape " +
                                       dir.file("shape.json") + " --noise " +
                                       dir.file("noise.json") + " --seed 77 --outdir ";
        CHECK_TRUE(testutil::run_cli(cli, noisy_args + dir.file("na"), dir).exit_code == 0);
        CHECK_TRUE(testutil::run_cli(cli, noisy_args + dir.file("nb"), dir).exit_code == 0);
        CHECK_TRUE(testutil::read_bytes(dir.file("na/mask_c1.pgm")) ==
                   testutil::read_bytes(dir.file("nb/mask_c1.pgm")));
        CHECK_TRUE(testutil::read_bytes(dir.file("na/mask_c2.pgm")) ==
                   testutil::read_bytes(dir.file("nb/mask_c2.pgm")));
        CHECK_TRUE(testutil::read_bytes(dir.file("na/mask_c1.pgm")) !=
                   testutil::read_bytes(dir.file("out1/mask_c1.pgm")));

        // a zero-radius profile renders valid, empty masks
        testutil::write_text(dir.file("zero.json"),
                             R"({"axis_base":[0,0,0],"profile":[[0,0],[50,0]]})");
        CHECK_TRUE(testutil::run_cli(cli,
                                     "synth --calib " + calib + " --shape " +
                                         dir.file("zero.json") + " --outdir " + dir.file("zero"),
                                     dir)
                       .exit_code == 0);
        const lode::Mask empty = lode::load_mask(dir.file("zero/mask_c1.pgm"));
        std::size_t ones = 0;
        for (auto b : empty.data)
            ones += b;
        CHECK_TRUE(ones == 0);
    }

    // --- estimate ------------------------------------------------------
    {
        const std::string m1 = dir.file("out1/mask_c1.pgm");
        const std::string m2 = dir.file("out1/mask_c2.pgm");
        const auto r = testutil::run_cli(cli,
                                         "estimate --calib " + calib + " --mask1 " + m1 +
                                             " --mask2 " + m2 + " --out " + dir.file("est.json"),
                                         dir);
        CHECK_TRUE(r.exit_code == 0);
        const auto doc = nlohmann::json::parse(r.stdout_text);
        CHECK_TRUE(doc.contains("centroid_mm") && doc.at("centroid_mm").size() == 3);
        CHECK_TRUE(doc.contains("width_mm"));
        CHECK_TRUE(doc.contains("height_mm"));
        CHECK_TRUE(doc.contains("converged"));
        CHECK_TRUE(doc.contains("iterations"));
        const double width = doc.at("width_mm").get<double>();
        CHECK_TRUE(width > 78.0 && width < 82.0);
        // --out holds the same document
        const auto from_file = nlohmann::json::parse(testutil::read_bytes(dir.file("est.json")));
        CHECK_TRUE(from_file == doc);

        // empty masks: exit 2
        lode::save_mask(lode::make_mask(640, 360), dir.file("empty.pgm"));
        CHECK_TRUE(testutil::run_cli(cli,
                                     "estimate --calib " + calib + " --mask1 " +
                                         dir.file("empty.pgm") + " --mask2 " +
                                         dir.file("empty.pgm"),
                                     dir)
                       .exit_code == 2);

        // missing file: exit 1
        CHECK_TRUE(testutil::run_cli(cli,
                                     "estimate --calib " + calib + " --mask1 " +
                                         dir.file("nope.pgm") + " --mask2 " + m2,
                                     dir)
                       .exit_code == 1);

        // localised but nothing converges: exit 3
        lode::Mask dot = lode::make_mask(640, 360);
        dot.at(320, 180) = 1;
        lode::save_mask(dot, dir.file("dot.pgm"));
        testutil::write_text(dir.file("tiny.json"),
                             R"({"L":3,"N":8,"r_start_mm":5,"r_step_mm":1,"rho_mm":1})");
        const auto r3 = testutil::run_cli(cli,
                                          "estimate --calib " + calib + " --mask1 " +
                                              dir.file("dot.pgm") + " --mask2 " +
                                              dir.file("dot.pgm") + " --params " +
                                              dir.file("tiny.json"),
                                          dir);
        CHECK_TRUE(r3.exit_code == 3);
        CHECK_TRUE(r3.stderr_text.find("no converged circumference") != std::string::npos);
    }

    // --- eval ----------------------------------------------------------
    {
        lode::save_mask(lode::make_mask(640, 360), dir.file("none1.pgm"));
        lode::save_mask(lode::make_mask(640, 360), dir.file("none2.pgm"));
        testutil::write_text(dir.file("manifest.json"), R"({"configurations":[
          {"id":"a","calib":"calib.json","masks":["out1/mask_c1.pgm","out1/mask_c2.pgm"],
           "depth":["out1/depth_c1.pgm","out1/depth_c2.pgm"],"gt_w_mm":80,"gt_h_mm":120,
           "tags":["cyl"]},
          {"id":"b","calib":"calib.json","masks":["na/mask_c1.pgm","na/mask_c2.pgm"],
           "gt_w_mm":80,"gt_h_mm":120,"tags":["cyl","noisy"]},
          {"id":"c","calib":"calib.json","masks":["out1/mask_c2.pgm","out1/mask_c1.pgm"],
           "gt_w_mm":80,"gt_h_mm":120,"tags":["swapped"]},
          {"id":"d","calib":"calib.json","masks":["none1.pgm","none2.pgm"],
           "gt_w_mm":80,"gt_h_mm":120,"tags":["empty"]}
        ]})");
        testutil::write_text(dir.file("quick.json"),
                             R"({"L":80,"dz_mm":3,"N":12,"r_start_mm":60,"r_step_mm":2})");

        const std::string args = "eval --manifest " + dir.file("manifest.json") +
                                 " --params " + dir.file("quick.json") + " --report ";
        const auto r = testutil::run_cli(cli, args + dir.file("r1.csv"), dir);
        CHECK_TRUE(r.exit_code == 0); // configuration 'd' fails, that is data
        CHECK_TRUE(std::filesystem::exists(dir.file("r1.csv")));
        CHECK_TRUE(std::filesystem::exists(dir.file("r1.summary.json")));
        CHECK_TRUE(std::filesystem::exists(dir.file("r1.segdd.csv")));

        const auto summary =
            nlohmann::json::parse(testutil::read_bytes(dir.file("r1.summary.json")));
        CHECK_TRUE(summary.at("total").get<int>() == 4);
        CHECK_TRUE(summary.at("successes").get<int>() == 3);
        CHECK_TRUE(summary.at("lsr_percent").get<double>() == 75.0);

        // a second run produces identical bytes
        CHECK_TRUE(testutil::run_cli(cli, args + dir.file("r2.csv"), dir).exit_code == 0);
        CHECK_TRUE(testutil::read_bytes(dir.file("r1.csv")) ==
                   testutil::read_bytes(dir.file("r2.csv")));
        CHECK_TRUE(testutil::read_bytes(dir.file("r1.summary.json")) ==
                   testutil::read_bytes(dir.file("r2.summary.json")));
        CHECK_TRUE(testutil::read_bytes(dir.file("r1.segdd.csv")) ==
                   testutil::read_bytes(dir.file("r2.segdd.csv")));

        // unreadable or empty manifests: exit 1
        CHECK_TRUE(testutil::run_cli(cli,
                                     "eval --manifest " + dir.file("missing.json") +
                                         " --report " + dir.file("x.csv"),
                                     dir)
                       .exit_code == 1);
        testutil::write_text(dir.file("empty_manifest.json"), R"({"configurations":[]})");
        CHECK_TRUE(testutil::run_cli(cli,
                                     "eval --manifest " + dir.file("empty_manifest.json") +
                                         " --report " + dir.file("x.csv"),
                                     dir)
                       .exit_code == 1);
    }

    // --- overlay -------------------------------------------------------
    {
        const auto r = testutil::run_cli(cli,
                                         "overlay --calib " + calib + " --mask1 " +
                                             dir.file("out1/mask_c1.pgm") + " --mask2 " +
                                             dir.file("out1/mask_c2.pgm") + " --out-prefix " +
                                             dir.file("ov"),
                                         dir);
        CHECK_TRUE(r.exit_code == 0);
        CHECK_TRUE(std::filesystem::exists(dir.file("ov_c1.ppm")));
        CHECK_TRUE(std::filesystem::exists(dir.file("ov_c2.ppm")));

        // every green point sits on an object pixel, in both views
        const std::array<std::string, 2> masks = {dir.file("out1/mask_c1.pgm"),
                                                  dir.file("out1/mask_c2.pgm")};
        for (int c = 0; c < 2; ++c) {
            const Ppm img = read_ppm(dir.file(std::string("ov_c") + char('1' + c) + ".ppm"));
            const lode::Mask mask = lode::load_mask(masks[c]);
            std::size_t green = 0;
            for (int v = 0; v < img.height; ++v)
                for (int u = 0; u < img.width; ++u) {
                    const std::size_t i = (static_cast<std::size_t>(v) * img.width + u) * 3;
                    if (img.rgb[i] == 0 && img.rgb[i + 1] == 255 && img.rgb[i + 2] == 0) {
                        ++green;
                        CHECK_TRUE(mask.at(u, v) == 1);
                    }
                }
            CHECK_TRUE(green > 0);
        }

        // all-ones masks with a wide rig: every drawn point is green
        const auto far_cams = testutil::fixture_cameras(1500.0, 320, 180, 150.0);
        testutil::write_text(dir.file("far.json"),
                             testutil::calibration_json({far_cams[0], far_cams[1]}));
        lode::save_mask(lode::make_mask(320, 180, 1), dir.file("ones.pgm"));
        CHECK_TRUE(testutil::run_cli(cli,
                                     "overlay --calib " + dir.file("far.json") + " --mask1 " +
                                         dir.file("ones.pgm") + " --mask2 " + dir.file("ones.pgm") +
                                         " --out-prefix " + dir.file("allgreen"),
                                     dir)
                       .exit_code == 0);
        const Ppm img = read_ppm(dir.file("allgreen_c1.ppm"));
        std::size_t green = 0, red_or_blue = 0;
        for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
            if (img.rgb[i] == 0 && img.rgb[i + 1] == 255 && img.rgb[i + 2] == 0)
                ++green;
            if ((img.rgb[i] == 255 && img.rgb[i + 1] == 0 && img.rgb[i + 2] == 0) ||
                (img.rgb[i] == 0 && img.rgb[i + 1] == 0 && img.rgb[i + 2] == 255))
                ++red_or_blue;
        }
        CHECK_TRUE(green > 0);
        CHECK_TRUE(red_or_blue == 0);

        // empty masks: exit 2 and no images written
        CHECK_TRUE(testutil::run_cli(cli,
                                     "overlay --calib " + calib + " --mask1 " +
                                         dir.file("empty.pgm") + " --mask2 " +
                                         dir.file("empty.pgm") + " --out-prefix " +
                                         dir.file("none_ov"),
                                     dir)
                       .exit_code == 2);
        CHECK_TRUE(!std::filesystem::exists(dir.file("none_ov_c1.ppm")));
    }

    if (g_failures == 0)
        std::printf("test_cli: all checks passed\n");
    else
        std::printf("test_cli: %d check(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
