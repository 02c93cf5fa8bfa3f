#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace lode {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// File access or format problems: missing files, bad headers, parse failures.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

/// A 3D point at or behind the camera plane cannot be projected.
class BehindCameraError : public Error {
public:
    BehindCameraError() : Error("behind camera") {}
};

/// Back-projected rays are too close to parallel for triangulation.
class DegenerateBaselineError : public Error {
public:
    DegenerateBaselineError() : Error("degenerate baseline") {}
};

/// A mask holds no object pixels, so the object cannot be localised.
class NoObjectError : public Error {
public:
    NoObjectError() : Error("no object") {}
};

/// The fit localised the object but no circumference passed verification,
/// leaving the dimensions undefined. Carries what was established anyway:
/// the triangulated centroid and the number of fitting passes.
class NoConvergedError : public Error {
public:
    NoConvergedError(const Eigen::Vector3d& centroid, int iterations)
        : Error("no converged circumference"),
          centroid_(centroid),
          iterations_(iterations) {}

    const Eigen::Vector3d& centroid() const { return centroid_; }
    int iterations() const { return iterations_; }

private:
    Eigen::Vector3d centroid_;
    int iterations_;
};

} // namespace lode
