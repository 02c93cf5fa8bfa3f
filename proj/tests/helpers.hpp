#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "lode/lode.hpp"

namespace testutil {

// Two orthogonal viewpoints at the given horizontal distance from the world
// origin, both at z = 0 looking at the vertical axis: camera c1 on -y looking
// along +y, camera c2 on -x looking along +x. Image down is world -z.
inline std::array<lode::CalibratedCamera, 2> fixture_cameras(double distance_mm = 400.0,
                                                             int width = 1280, int height = 720,
                                                             double focal_px = 600.0) {
    lode::CalibratedCamera c1;
    c1.id = "c1";
    c1.intrinsics = {focal_px, focal_px, width / 2.0, height / 2.0, width, height};
    c1.pose.rotation << 1, 0, 0,
                        0, 0, -1,
                        0, 1, 0;
    c1.pose.translation = -(c1.pose.rotation * Eigen::Vector3d(0, -distance_mm, 0));

    lode::CalibratedCamera c2;
    c2.id = "c2";
    c2.intrinsics = c1.intrinsics;
    c2.pose.rotation << 0, -1, 0,
                        0, 0, -1,
                        1, 0, 0;
    c2.pose.translation = -(c2.pose.rotation * Eigen::Vector3d(-distance_mm, 0, 0));

    lode::validate_camera(c1);
    lode::validate_camera(c2);
    return {c1, c2};
}

inline lode::CalibratedCamera identity_camera(double focal_px = 600.0, double cx = 640.0,
                                              double cy = 360.0, int width = 1280,
                                              int height = 720) {
    lode::CalibratedCamera cam;
    cam.id = "ident";
    cam.intrinsics = {focal_px, focal_px, cx, cy, width, height};
    return cam;
}

inline lode::RevolutionShape cylinder_shape(double radius_mm = 40.0, double height_mm = 120.0,
                                            const Eigen::Vector3d& base = Eigen::Vector3d::Zero()) {
    lode::RevolutionShape shape;
    shape.axis_base = base;
    shape.profile = {{0.0, radius_mm}, {height_mm, radius_mm}};
    return shape;
}

class ScopedTempDir {
public:
    explicit ScopedTempDir(const std::string& label) {
        static std::atomic<int> counter{0};
        std::random_device rd;
        std::ostringstream name;
        name << "lode_" << label << "_" << rd() << "_" << counter.fetch_add(1);
        path_ = std::filesystem::temp_directory_path() / name.str();
        std::filesystem::create_directories(path_);
    }
    ~ScopedTempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScopedTempDir(const ScopedTempDir&) = delete;
    ScopedTempDir& operator=(const ScopedTempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::string calibration_json(const std::vector<lode::CalibratedCamera>& cams) {
    std::ostringstream out;
    out.precision(17);
    out << "{\"cameras\":[";
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const auto& cam = cams[i];
        if (i)
            out << ",";
        out << "{\"id\":\"" << cam.id << "\",\"intrinsics\":{"
            << "\"fx\":" << cam.intrinsics.fx << ",\"fy\":" << cam.intrinsics.fy
            << ",\"cx\":" << cam.intrinsics.cx << ",\"cy\":" << cam.intrinsics.cy
            << ",\"width\":" << cam.intrinsics.width << ",\"height\":" << cam.intrinsics.height
            << "},\"rotation\":[";
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                out << cam.pose.rotation(r, c) << (r == 2 && c == 2 ? "" : ",");
        out << "],\"translation\":[" << cam.pose.translation.x() << ","
            << cam.pose.translation.y() << "," << cam.pose.translation.z() << "]}";
    }
    out << "]}";
    return out.str();
}

// Brute-force moment oracle, independently written double loop.
inline lode::PixelCentroid brute_centroid(const lode::Mask& m) {
    std::uint64_t count = 0, sum_u = 0, sum_v = 0;
    for (int v = 0; v < m.height; ++v)
        for (int u = 0; u < m.width; ++u)
            if (m.data[static_cast<std::size_t>(v) * m.width + u]) {
                count += 1;
                sum_u += static_cast<std::uint64_t>(u);
                sum_v += static_cast<std::uint64_t>(v);
            }
    lode::PixelCentroid c;
    c.mass = count;
    if (count) {
        c.u = double(sum_u) / double(count);
        c.v = double(sum_v) / double(count);
    }
    return c;
}

// Independent percentile oracle: linear interpolation between closest ranks,
// written from the definition.
inline double oracle_percentile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 1)
        return values[0];
    const double h = (p / 100.0) * double(n - 1);
    const std::size_t k = static_cast<std::size_t>(h);
    if (k >= n - 1)
        return values[n - 1];
    return values[k] + (h - double(k)) * (values[k + 1] - values[k]);
}

struct CliResult {
    int exit_code = -1;
    std::string stdout_text;
    std::string stderr_text;
};

// Runs the CLI binary with the given arguments, capturing streams.
inline CliResult run_cli(const std::string& cli, const std::string& args,
                         const ScopedTempDir& dir) {
    static std::atomic<int> counter{0};
    const int n = counter.fetch_add(1);
    const std::string out_file = dir.file("cli_out_" + std::to_string(n) + ".txt");
    const std::string err_file = dir.file("cli_err_" + std::to_string(n) + ".txt");
    const std::string command =
        "\"" + cli + "\" " + args + " > \"" + out_file + "\" 2> \"" + err_file + "\"";
    const int status = std::system(command.c_str());

    CliResult result;
    if (status >= 0 && WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    result.stdout_text = read_bytes(out_file);
    result.stderr_text = read_bytes(err_file);
    return result;
}

} // namespace testutil
