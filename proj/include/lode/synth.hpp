#pragma once

// Ground-truth oracle: exact silhouette and depth rendering of solids of
// revolution by per-pixel ray casting, plus seeded mask perturbation.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "lode/camera.hpp"
#include "lode/errors.hpp"
#include "lode/mask.hpp"
#include "lode/pnm.hpp"

namespace lode {

/// Solid of revolution around a vertical axis: a piecewise-linear radial
/// profile swept about the line through axis_base. Profile entries are
/// (height offset above the base, radius) with offsets strictly increasing
/// from 0. The boundary is the lateral frusta plus the two end disks.
struct RevolutionShape {
    Eigen::Vector3d axis_base = Eigen::Vector3d::Zero(); // world mm, bottom of the solid
    std::vector<std::array<double, 2>> profile;          // (height offset mm, radius mm)

    double true_width() const {
        double r_max = 0.0;
        for (const auto& p : profile)
            r_max = std::max(r_max, p[1]);
        return 2.0 * r_max;
    }
    double true_height() const { return profile.empty() ? 0.0 : profile.back()[0]; }
};

inline void validate(const RevolutionShape& shape) {
    if (shape.profile.size() < 2)
        throw Error("invalid shape: profile needs at least 2 points");
    if (shape.profile.front()[0] != 0.0)
        throw Error("invalid shape: profile must start at height offset 0");
    for (std::size_t i = 0; i < shape.profile.size(); ++i) {
        if (shape.profile[i][1] < 0.0)
            throw Error("invalid shape: negative radius");
        if (i > 0 && !(shape.profile[i][0] > shape.profile[i - 1][0]))
            throw Error("invalid shape: height offsets must be strictly increasing");
    }
}

/// {"axis_base":[x,y,z],"profile":[[h0,r0],[h1,r1],...]}
inline RevolutionShape load_shape(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open shape file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw IoError("shape parse error: " + std::string(e.what()));
    }

    RevolutionShape shape;
    try {
        const auto& jb = doc.at("axis_base");
        if (jb.size() != 3)
            throw IoError("shape parse error: axis_base must hold 3 numbers");
        for (int i = 0; i < 3; ++i)
            shape.axis_base(i) = jb.at(i).get<double>();
        for (const auto& jp : doc.at("profile")) {
            if (jp.size() != 2)
                throw IoError("shape parse error: profile entries must be [height, radius] pairs");
            shape.profile.push_back({jp.at(0).get<double>(), jp.at(1).get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("shape parse error: " + std::string(e.what()));
    }
    validate(shape);
    return shape;
}

/// Smallest t > 0 where the ray meets the boundary of the solid, if any.
/// Lateral hits solve |p_xy(t) - axis_xy|^2 = r(z(t))^2 with r linear in z on
/// each profile segment; end disks solve the plane equation and range-check
/// the radius.
inline std::optional<double> ray_shape_intersect(const Ray& ray, const RevolutionShape& shape) {
    constexpr double kTMin = 1e-9;
    double best = std::numeric_limits<double>::infinity();

    const Eigen::Vector2d o(ray.origin.x() - shape.axis_base.x(),
                            ray.origin.y() - shape.axis_base.y());
    const Eigen::Vector2d d(ray.direction.x(), ray.direction.y());
    const double oz = ray.origin.z();
    const double dz = ray.direction.z();
    const double base_z = shape.axis_base.z();

    const auto try_disk = [&](double plane_z, double radius) {
        if (radius <= 0.0 || std::abs(dz) < 1e-15)
            return;
        const double t = (plane_z - oz) / dz;
        if (t <= kTMin || t >= best)
            return;
        if ((o + t * d).squaredNorm() <= radius * radius)
            best = t;
    };
    try_disk(base_z + shape.profile.front()[0], shape.profile.front()[1]);
    try_disk(base_z + shape.profile.back()[0], shape.profile.back()[1]);

    const auto try_lateral = [&](double t, double z_lo, double z_hi) {
        if (t <= kTMin || t >= best)
            return;
        const double z = oz + t * dz;
        if (z >= z_lo && z <= z_hi)
            best = t;
    };

    for (std::size_t i = 0; i + 1 < shape.profile.size(); ++i) {
        // A segment with zero radius at both ends is a line, not a surface.
        if (shape.profile[i][1] == 0.0 && shape.profile[i + 1][1] == 0.0)
            continue;
        const double z0 = base_z + shape.profile[i][0];
        const double z1 = base_z + shape.profile[i + 1][0];
        const double slope = (shape.profile[i + 1][1] - shape.profile[i][1]) / (z1 - z0);
        // r along the ray: r(z(t)) = c0 + c1 * t
        const double c0 = shape.profile[i][1] + slope * (oz - z0);
        const double c1 = slope * dz;

        const double a = d.dot(d) - c1 * c1;
        const double b = 2.0 * (o.dot(d) - c0 * c1);
        const double c = o.dot(o) - c0 * c0;

        if (std::abs(a) < 1e-14) {
            if (std::abs(b) > 1e-14)
                try_lateral(-c / b, z0, z1);
            continue;
        }
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0)
            continue;
        const double sq = std::sqrt(disc);
        try_lateral((-b - sq) / (2.0 * a), z0, z1);
        try_lateral((-b + sq) / (2.0 * a), z0, z1);
    }

    if (std::isinf(best))
        return std::nullopt;
    return best;
}

/// Per-pixel camera-frame depth in mm; 0 marks pixels with no surface.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> data; // z_cam in mm, size width*height

    double at(int u, int v) const {
        return data[static_cast<std::size_t>(v) * width + u];
    }
};

/// Casts one ray through each pixel centre and records the camera-frame z of
/// the nearest hit. z_cam equals t times the camera-frame z component of the
/// unit ray direction (the camera centre maps to the camera-frame origin).
inline DepthMap render_depth(const CalibratedCamera& cam, const RevolutionShape& shape) {
    validate(shape);
    DepthMap depth;
    depth.width = cam.intrinsics.width;
    depth.height = cam.intrinsics.height;
    depth.data.assign(static_cast<std::size_t>(depth.width) * depth.height, 0.0);

    std::size_t idx = 0;
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u, ++idx) {
            const Ray ray = backproject_ray(cam, {static_cast<double>(u), static_cast<double>(v)});
            if (const auto t = ray_shape_intersect(ray, shape)) {
                const double z_cam = *t * (cam.pose.rotation * ray.direction).z();
                depth.data[idx] = z_cam;
            }
        }
    }
    return depth;
}

/// Exact silhouette: pixel = 1 iff the pixel-centre ray hits the solid.
/// Shares the ray casting with render_depth, so depth > 0 <=> mask = 1.
inline Mask render_mask(const CalibratedCamera& cam, const RevolutionShape& shape) {
    const DepthMap depth = render_depth(cam, shape);
    Mask m = make_mask(depth.width, depth.height);
    for (std::size_t i = 0; i < depth.data.size(); ++i)
        m.data[i] = depth.data[i] > 0.0 ? 1 : 0;
    return m;
}

/// Writes depth as 16-bit big-endian PGM (P5, maxval 65535); values are
/// round(z_cam in mm), saturating at 65535.
inline void save_depth(const DepthMap& depth, const std::string& path) {
    auto out = pnm::open_output(path);
    pnm::write_header(out, "P5", depth.width, depth.height, 65535);
    std::vector<std::uint8_t> raw(depth.data.size() * 2);
    for (std::size_t i = 0; i < depth.data.size(); ++i) {
        const long long rounded = std::llround(depth.data[i]);
        const std::uint16_t value =
            static_cast<std::uint16_t>(std::min<long long>(std::max<long long>(rounded, 0), 65535));
        raw[2 * i] = static_cast<std::uint8_t>(value >> 8);
        raw[2 * i + 1] = static_cast<std::uint8_t>(value & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out)
        throw IoError("failed to write depth map: " + path);
}

inline DepthMap load_depth(const std::string& path) {
    auto in = pnm::open_input(path);
    const pnm::Header h = pnm::read_header(in, "P5");
    if (h.maxval != 65535)
        throw IoError("unsupported maxval " + std::to_string(h.maxval) + " in " + path);

    DepthMap depth;
    depth.width = h.width;
    depth.height = h.height;
    const std::size_t count = static_cast<std::size_t>(h.width) * h.height;
    const auto raw = pnm::read_payload(in, count * 2);
    depth.data.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        depth.data[i] = static_cast<double>((raw[2 * i] << 8) | raw[2 * i + 1]);
    return depth;
}

/// Controlled segmentation imperfection: a signed morphological offset
/// followed by seeded flips of boundary-adjacent pixels.
struct NoiseParams {
    double boundary_flip_prob = 0.0;
    int dilation_px = 0; // > 0 dilates, < 0 erodes, 3x3 structuring element per step
    std::uint32_t seed = 0;
};

namespace detail {

inline Mask morph_3x3(const Mask& m, bool dilate) {
    Mask out = make_mask(m.width, m.height);
    for (int v = 0; v < m.height; ++v) {
        for (int u = 0; u < m.width; ++u) {
            bool value = !dilate;
            for (int dv = -1; dv <= 1 && (dilate ? !value : value); ++dv) {
                for (int du = -1; du <= 1; ++du) {
                    const int uu = u + du, vv = v + dv;
                    // out-of-bounds neighbours count as background
                    const bool bit = m.in_bounds(uu, vv) && m.at(uu, vv) != 0;
                    if (dilate)
                        value = value || bit;
                    else
                        value = value && bit;
                }
            }
            out.at(u, v) = value ? 1 : 0;
        }
    }
    return out;
}

// A pixel is boundary-adjacent when some in-bounds 8-neighbour differs.
inline std::vector<std::uint8_t> boundary_flags(const Mask& m) {
    std::vector<std::uint8_t> flags(m.data.size(), 0);
    for (int v = 0; v < m.height; ++v) {
        for (int u = 0; u < m.width; ++u) {
            const std::uint8_t centre = m.at(u, v);
            bool boundary = false;
            for (int dv = -1; dv <= 1 && !boundary; ++dv)
                for (int du = -1; du <= 1; ++du) {
                    const int uu = u + du, vv = v + dv;
                    if (m.in_bounds(uu, vv) && m.at(uu, vv) != centre) {
                        boundary = true;
                        break;
                    }
                }
            flags[static_cast<std::size_t>(v) * m.width + u] = boundary ? 1 : 0;
        }
    }
    return flags;
}

} // namespace detail

/// Deterministic: identical mask and params give a bitwise-identical result.
/// Noise draws happen in row-major order over the boundary pixels of the
/// post-morphology mask.
inline Mask perturb_mask(const Mask& mask, const NoiseParams& noise) {
    if (!(noise.boundary_flip_prob >= 0.0 && noise.boundary_flip_prob <= 1.0))
        throw Error("invalid noise params: flip probability must be in [0,1]");

    Mask m = mask;
    for (int i = 0; i < std::abs(noise.dilation_px); ++i)
        m = detail::morph_3x3(m, noise.dilation_px > 0);

    if (noise.boundary_flip_prob > 0.0) {
        const auto flags = detail::boundary_flags(m);
        std::mt19937 rng(noise.seed);
        for (std::size_t i = 0; i < m.data.size(); ++i) {
            if (!flags[i])
                continue;
            const double u = static_cast<double>(rng()) * 0x1p-32;
            if (u < noise.boundary_flip_prob)
                m.data[i] ^= 1;
        }
    }
    return m;
}

} // namespace lode
