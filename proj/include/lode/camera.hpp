#pragma once

// Pinhole camera model: calibration ingestion, 3D->2D projection, ray
// back-projection and two-view midpoint triangulation.
//
// Conventions (also documented in the calibration file format):
//   - world frame: z-axis vertical up, units millimetres
//   - extrinsics stored world->camera, x_cam = R * X + t
//   - camera frame: x right, y down, z along the optical axis

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lode/errors.hpp"

namespace lode {

inline constexpr double kDepthEpsilonMm = 1e-6;
inline constexpr double kMinTriangulationAngleDeg = 0.1;

struct Intrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
};

struct CameraPose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity(); // world -> camera
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // mm
};

struct CalibratedCamera {
    Intrinsics intrinsics;
    CameraPose pose;
    std::string id;
};

struct Ray {
    Eigen::Vector3d origin = Eigen::Vector3d::Zero(); // camera centre, world mm
    Eigen::Vector3d direction = Eigen::Vector3d::UnitZ(); // unit length
};

inline void validate_camera(const CalibratedCamera& cam) {
    const Intrinsics& in = cam.intrinsics;
    if (!std::isfinite(in.fx) || !std::isfinite(in.fy) || !std::isfinite(in.cx) ||
        !std::isfinite(in.cy))
        throw Error("invalid intrinsics: non-finite entries");
    if (!(in.fx > 0.0) || !(in.fy > 0.0))
        throw Error("invalid intrinsics: focal lengths must be positive");
    if (in.width <= 0 || in.height <= 0)
        throw Error("invalid intrinsics: image size must be positive");
    if (!(in.cx >= 0.0 && in.cx < in.width) || !(in.cy >= 0.0 && in.cy < in.height))
        throw Error("invalid intrinsics: principal point outside image");

    const Eigen::Matrix3d& r = cam.pose.rotation;
    if (!r.allFinite() || !cam.pose.translation.allFinite())
        throw Error("invalid pose: non-finite entries");
    const double ortho_err =
        ((r.transpose() * r) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho_err > 1e-9 || std::abs(r.determinant() - 1.0) > 1e-9)
        throw Error("invalid rotation");
}

/// Camera centre in world coordinates, -R^T * t.
inline Eigen::Vector3d camera_center(const CalibratedCamera& cam) {
    return -(cam.pose.rotation.transpose() * cam.pose.translation);
}

/// Projects a world point to pixel coordinates. The result may lie outside
/// the image bounds; callers decide what to do with it.
inline Eigen::Vector2d project(const CalibratedCamera& cam, const Eigen::Vector3d& point) {
    const Eigen::Vector3d pc = cam.pose.rotation * point + cam.pose.translation;
    if (!(pc.z() > kDepthEpsilonMm))
        throw BehindCameraError();
    return {cam.intrinsics.fx * pc.x() / pc.z() + cam.intrinsics.cx,
            cam.intrinsics.fy * pc.y() / pc.z() + cam.intrinsics.cy};
}

/// Ray through a (possibly sub-pixel) image location, in world coordinates.
inline Ray backproject_ray(const CalibratedCamera& cam, const Eigen::Vector2d& pixel) {
    const Eigen::Vector3d dir_cam((pixel.x() - cam.intrinsics.cx) / cam.intrinsics.fx,
                                  (pixel.y() - cam.intrinsics.cy) / cam.intrinsics.fy,
                                  1.0);
    Ray ray;
    ray.origin = camera_center(cam);
    ray.direction = (cam.pose.rotation.transpose() * dir_cam).normalized();
    return ray;
}

/// Midpoint triangulation: back-projects both pixels and returns the midpoint
/// of the common perpendicular segment between the two rays. Exact for
/// noiseless observations.
inline Eigen::Vector3d triangulate(const CalibratedCamera& cam1, const CalibratedCamera& cam2,
                                   const Eigen::Vector2d& px1, const Eigen::Vector2d& px2) {
    const Ray r1 = backproject_ray(cam1, px1);
    const Ray r2 = backproject_ray(cam2, px2);

    const double cos_angle = std::abs(r1.direction.dot(r2.direction));
    const double cos_limit = std::cos(kMinTriangulationAngleDeg * std::numbers::pi / 180.0);
    if (cos_angle >= cos_limit)
        throw DegenerateBaselineError();

    // Closest points: with unit directions u, v and w = o1 - o2,
    // s = (b*e - d) / (1 - b^2),  t = (e - b*d) / (1 - b^2).
    const Eigen::Vector3d w = r1.origin - r2.origin;
    const double b = r1.direction.dot(r2.direction);
    const double d = r1.direction.dot(w);
    const double e = r2.direction.dot(w);
    const double denom = 1.0 - b * b;
    const double s = (b * e - d) / denom;
    const double t = (e - b * d) / denom;
    return 0.5 * (r1.origin + s * r1.direction + r2.origin + t * r2.direction);
}

/// Loads cameras from the JSON calibration format:
///   {"cameras": [{"id": ..., "intrinsics": {"fx","fy","cx","cy","width","height"},
///                 "rotation": [9 numbers, row-major world->camera],
///                 "translation": [3 numbers, mm]}]}
inline std::vector<CalibratedCamera> load_calibration(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open calibration file: " + path);

    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw IoError("calibration parse error: " + std::string(e.what()));
    }

    std::vector<CalibratedCamera> cameras;
    try {
        for (const auto& jc : doc.at("cameras")) {
            CalibratedCamera cam;
            cam.id = jc.at("id").get<std::string>();
            const auto& ji = jc.at("intrinsics");
            cam.intrinsics.fx = ji.at("fx").get<double>();
            cam.intrinsics.fy = ji.at("fy").get<double>();
            cam.intrinsics.cx = ji.at("cx").get<double>();
            cam.intrinsics.cy = ji.at("cy").get<double>();
            cam.intrinsics.width = ji.at("width").get<int>();
            cam.intrinsics.height = ji.at("height").get<int>();

            const auto& jr = jc.at("rotation");
            const auto& jt = jc.at("translation");
            if (jr.size() != 9 || jt.size() != 3)
                throw IoError(
                    "calibration parse error: rotation must hold 9 numbers and translation 3");
            for (int row = 0; row < 3; ++row)
                for (int col = 0; col < 3; ++col)
                    cam.pose.rotation(row, col) = jr.at(row * 3 + col).get<double>();
            for (int i = 0; i < 3; ++i)
                cam.pose.translation(i) = jt.at(i).get<double>();

            validate_camera(cam);
            cameras.push_back(std::move(cam));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("calibration parse error: " + std::string(e.what()));
    }
    if (cameras.empty())
        throw IoError("calibration lists no cameras: " + path);
    return cameras;
}

/// Convenience for the two-view pipeline; the first two listed cameras.
inline std::array<CalibratedCamera, 2> load_camera_pair(const std::string& path) {
    auto cameras = load_calibration(path);
    if (cameras.size() < 2)
        throw IoError("calibration lists fewer than 2 cameras: " + path);
    return {std::move(cameras[0]), std::move(cameras[1])};
}

} // namespace lode
