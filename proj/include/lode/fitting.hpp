#pragma once

// Generative circumference model and the iterative 3D-2D shape fit.
//
// The model is a stack of L horizontal circles centred on the triangulated
// object centroid. Every pass tests each still-active circle at its current
// schedule radius against both masks; circles whose N sampled points all
// re-project inside both masks freeze, the rest step down the radius
// schedule. Dimensions come from the frozen circles only.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "lode/camera.hpp"
#include "lode/errors.hpp"
#include "lode/mask.hpp"

namespace lode {

struct FitParams {
    int num_circumferences = 0;           // L
    double height_step_mm = 0.0;          // dz
    int points_per_circumference = 0;     // N
    std::vector<double> radius_schedule;  // strictly decreasing, ends at min_radius_mm
    double min_radius_mm = 0.0;           // rho
};

inline void validate(const FitParams& p) {
    if (p.num_circumferences < 1)
        throw Error("invalid fit params: circumference count must be >= 1");
    if (p.points_per_circumference < 3)
        throw Error("invalid fit params: points per circumference must be >= 3");
    if (!(p.height_step_mm > 0.0))
        throw Error("invalid fit params: height step must be > 0");
    if (!(p.min_radius_mm > 0.0))
        throw Error("invalid fit params: minimum radius must be > 0");
    if (p.radius_schedule.empty())
        throw Error("invalid fit params: empty radius schedule");
    for (std::size_t i = 0; i + 1 < p.radius_schedule.size(); ++i)
        if (!(p.radius_schedule[i] > p.radius_schedule[i + 1]))
            throw Error("invalid fit params: radius schedule must be strictly decreasing");
    if (p.radius_schedule.back() != p.min_radius_mm)
        throw Error("invalid fit params: radius schedule must end at the minimum radius");
}

/// Builds the schedule r_start, r_start - step, ... down to the smallest
/// value >= rho + step, with rho appended as the final entry.
inline std::vector<double> make_radius_schedule(double r_start_mm, double r_step_mm,
                                                double rho_mm) {
    if (!(r_step_mm > 0.0) || !(rho_mm > 0.0))
        throw Error("invalid fit params: radius step and minimum radius must be > 0");
    if (r_start_mm < rho_mm)
        throw Error("invalid fit params: starting radius below minimum radius");

    std::vector<double> schedule;
    const long k_max =
        static_cast<long>(std::floor((r_start_mm - rho_mm - r_step_mm) / r_step_mm + 1e-9));
    for (long k = 0; k <= k_max; ++k)
        schedule.push_back(r_start_mm - static_cast<double>(k) * r_step_mm);
    schedule.push_back(rho_mm);
    return schedule;
}

/// L=500 circles 1 mm apart, 20 points each, radii 150.0, 149.5, ..., 1.5
/// and finally 1.0.
inline FitParams default_params() {
    FitParams p;
    p.num_circumferences = 500;
    p.height_step_mm = 1.0;
    p.points_per_circumference = 20;
    p.min_radius_mm = 1.0;
    p.radius_schedule = make_radius_schedule(150.0, 0.5, 1.0);
    return p;
}

/// Partial override of the defaults from a JSON file with any of the keys
/// {"L","dz_mm","N","r_start_mm","r_step_mm","rho_mm"}; the schedule is
/// rebuilt from the radius keys.
inline FitParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open params file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw IoError("params parse error: " + std::string(e.what()));
    }

    FitParams p = default_params();
    double r_start = 150.0, r_step = 0.5;
    try {
        if (doc.contains("L")) p.num_circumferences = doc.at("L").get<int>();
        if (doc.contains("dz_mm")) p.height_step_mm = doc.at("dz_mm").get<double>();
        if (doc.contains("N")) p.points_per_circumference = doc.at("N").get<int>();
        if (doc.contains("r_start_mm")) r_start = doc.at("r_start_mm").get<double>();
        if (doc.contains("r_step_mm")) r_step = doc.at("r_step_mm").get<double>();
        if (doc.contains("rho_mm")) p.min_radius_mm = doc.at("rho_mm").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("params parse error: " + std::string(e.what()));
    }
    p.radius_schedule = make_radius_schedule(r_start, r_step, p.min_radius_mm);
    validate(p);
    return p;
}

/// One horizontal circle of the model. Once converged the radius is frozen
/// at its convergence value and never re-sampled.
struct Circumference {
    double radius_mm = 0.0;
    double height_mm = 0.0; // world z
    bool converged = false;
    int schedule_index = 0;
};

struct CircumferenceSet {
    std::vector<Circumference> circumferences;
    Eigen::Vector3d center = Eigen::Vector3d::Zero(); // triangulated centroid
};

/// O = (x, y, z, w, h) plus bookkeeping from the fit loop.
struct ObjectEstimate {
    Eigen::Vector3d centroid_mm = Eigen::Vector3d::Zero();
    double width_mm = 0.0;
    double height_mm = 0.0;
    int converged_count = 0;
    int iterations = 0;
};

/// All circles at the first schedule radius, heights centred on the
/// centroid's z: z_l = z_c + (l - (L+1)/2) * dz for l = 1..L.
inline CircumferenceSet init_model(const Eigen::Vector3d& centroid, const FitParams& params) {
    validate(params);
    CircumferenceSet set;
    set.center = centroid;
    const int count = params.num_circumferences;
    set.circumferences.reserve(static_cast<std::size_t>(count));
    for (int l = 1; l <= count; ++l) {
        Circumference c;
        c.radius_mm = params.radius_schedule.front();
        c.height_mm = centroid.z() + (l - (count + 1) / 2.0) * params.height_step_mm;
        set.circumferences.push_back(c);
    }
    return set;
}

/// N points evenly spaced on the circle, starting at angle 0.
inline std::vector<Eigen::Vector3d> sample_circumference(const Circumference& circ,
                                                         const Eigen::Vector2d& center_xy,
                                                         int num_points) {
    if (num_points < 3)
        throw Error("invalid fit params: points per circumference must be >= 3");
    std::vector<Eigen::Vector3d> points;
    points.reserve(static_cast<std::size_t>(num_points));
    for (int n = 0; n < num_points; ++n) {
        const double angle = 2.0 * std::numbers::pi * n / num_points;
        points.emplace_back(center_xy.x() + circ.radius_mm * std::cos(angle),
                            center_xy.y() + circ.radius_mm * std::sin(angle),
                            circ.height_mm);
    }
    return points;
}

namespace detail {

// Projection folded into a membership bit: points behind the camera or
// outside the image count as outside the mask.
inline bool projects_into_mask(const CalibratedCamera& cam, const Mask& mask,
                               const Eigen::Vector3d& point) {
    const Eigen::Vector3d pc = cam.pose.rotation * point + cam.pose.translation;
    if (!(pc.z() > kDepthEpsilonMm))
        return false;
    return mask_contains(mask, {cam.intrinsics.fx * pc.x() / pc.z() + cam.intrinsics.cx,
                                cam.intrinsics.fy * pc.y() / pc.z() + cam.intrinsics.cy});
}

} // namespace detail

/// eta = per-camera membership count summed over both views; the
/// circumference converges iff eta == 2N.
inline int verify_circumference(const std::vector<Eigen::Vector3d>& points,
                                const CalibratedCamera& cam1, const CalibratedCamera& cam2,
                                const Mask& mask1, const Mask& mask2) {
    int eta = 0;
    for (const auto& p : points) {
        eta += detail::projects_into_mask(cam1, mask1, p) ? 1 : 0;
        eta += detail::projects_into_mask(cam2, mask2, p) ? 1 : 0;
    }
    return eta;
}

/// Invoked after every fitting pass with the pass number (1-based) and the
/// current model state.
using PassObserver = std::function<void(int pass, const CircumferenceSet&)>;

/// Full fit outcome including the final model state, for diagnostics,
/// overlays and oracle tests.
struct FitReport {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    CircumferenceSet model;
    int iterations = 0;
    int converged_count = 0;
};

inline FitReport fit_detailed(const CalibratedCamera& cam1, const CalibratedCamera& cam2,
                              const Mask& mask1, const Mask& mask2, const FitParams& params,
                              const PassObserver& observer = {}) {
    validate(params);

    const PixelCentroid c1 = mask_centroid(mask1); // throws NoObjectError when empty
    const PixelCentroid c2 = mask_centroid(mask2);
    const Eigen::Vector3d centroid =
        triangulate(cam1, cam2, {c1.u, c1.v}, {c2.u, c2.v});

    CircumferenceSet model = init_model(centroid, params);
    const Eigen::Vector2d center_xy(centroid.x(), centroid.y());
    const int points_per_circ = params.points_per_circumference;
    const int schedule_size = static_cast<int>(params.radius_schedule.size());

    int pass = 0;
    bool any_active = true;
    while (any_active) {
        any_active = false;
        for (Circumference& circ : model.circumferences) {
            if (circ.converged || circ.schedule_index >= schedule_size)
                continue;
            const auto points = sample_circumference(circ, center_xy, points_per_circ);
            if (verify_circumference(points, cam1, cam2, mask1, mask2) == 2 * points_per_circ) {
                circ.converged = true; // frozen from here on
            } else {
                ++circ.schedule_index;
                if (circ.schedule_index < schedule_size) {
                    circ.radius_mm = params.radius_schedule[circ.schedule_index];
                    any_active = true;
                }
            }
        }
        ++pass;
        if (observer)
            observer(pass, model);
    }

    FitReport report;
    report.centroid = centroid;
    report.iterations = pass;
    for (const Circumference& circ : model.circumferences)
        if (circ.converged)
            ++report.converged_count;
    report.model = std::move(model);
    return report;
}

/// w = 2 * max converged radius, h = span of converged heights.
inline std::pair<double, double> extract_dimensions(const CircumferenceSet& set) {
    double r_star = -1.0;
    double z_min = std::numeric_limits<double>::infinity();
    double z_max = -std::numeric_limits<double>::infinity();
    for (const Circumference& circ : set.circumferences) {
        if (!circ.converged)
            continue;
        r_star = std::max(r_star, circ.radius_mm);
        z_min = std::min(z_min, circ.height_mm);
        z_max = std::max(z_max, circ.height_mm);
    }
    if (r_star < 0.0)
        throw NoConvergedError(set.center, 0);
    return {2.0 * r_star, z_max - z_min};
}

/// End-to-end fit: centroids -> triangulation -> shape fit -> dimensions.
inline ObjectEstimate fit(const CalibratedCamera& cam1, const CalibratedCamera& cam2,
                          const Mask& mask1, const Mask& mask2, const FitParams& params,
                          const PassObserver& observer = {}) {
    FitReport report = fit_detailed(cam1, cam2, mask1, mask2, params, observer);
    if (report.converged_count == 0)
        throw NoConvergedError(report.centroid, report.iterations);
    const auto [width, height] = extract_dimensions(report.model);

    ObjectEstimate estimate;
    estimate.centroid_mm = report.centroid;
    estimate.width_mm = width;
    estimate.height_mm = height;
    estimate.converged_count = report.converged_count;
    estimate.iterations = report.iterations;
    return estimate;
}

} // namespace lode
