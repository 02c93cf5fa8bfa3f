#pragma once

// Binary segmentation masks: PGM ingestion, membership tests and the
// intensity-centroid computation used for 2D localisation.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lode/errors.hpp"
#include "lode/pnm.hpp"

namespace lode {

/// W x H binary grid, row-major, top-left origin. 1 marks object pixels.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // values in {0,1}, size width*height

    std::uint8_t at(int u, int v) const {
        return data[static_cast<std::size_t>(v) * width + u];
    }
    std::uint8_t& at(int u, int v) {
        return data[static_cast<std::size_t>(v) * width + u];
    }
    bool in_bounds(int u, int v) const {
        return u >= 0 && u < width && v >= 0 && v < height;
    }
};

inline Mask make_mask(int width, int height, std::uint8_t fill = 0) {
    Mask m;
    m.width = width;
    m.height = height;
    m.data.assign(static_cast<std::size_t>(width) * height, fill);
    return m;
}

/// Sub-pixel centroid of the object region plus its pixel count.
struct PixelCentroid {
    double u = 0.0;
    double v = 0.0;
    std::uint64_t mass = 0;
};

/// Reads an 8-bit binary PGM (P5, maxval 255); values above 127 become 1.
inline Mask load_mask(const std::string& path) {
    auto in = pnm::open_input(path);
    const pnm::Header h = pnm::read_header(in, "P5");
    if (h.maxval != 255)
        throw IoError("unsupported maxval " + std::to_string(h.maxval) + " in " + path);

    Mask m = make_mask(h.width, h.height);
    const auto raw = pnm::read_payload(in, m.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        m.data[i] = raw[i] > 127 ? 1 : 0;
    return m;
}

/// Writes the mask as binary PGM; object pixels become 255.
inline void save_mask(const Mask& m, const std::string& path) {
    auto out = pnm::open_output(path);
    pnm::write_header(out, "P5", m.width, m.height, 255);
    std::vector<std::uint8_t> raw(m.data.size());
    for (std::size_t i = 0; i < m.data.size(); ++i)
        raw[i] = m.data[i] ? 255 : 0;
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out)
        throw IoError("failed to write mask: " + path);
}

/// Intensity centroid: u = m10/m00, v = m01/m00 with integer moments over
/// object pixels (pixel centres at integer coordinates). An empty mask is
/// the localisation-failure signal.
inline PixelCentroid mask_centroid(const Mask& m) {
    std::uint64_t m00 = 0, m10 = 0, m01 = 0;
    for (int v = 0; v < m.height; ++v) {
        for (int u = 0; u < m.width; ++u) {
            if (m.at(u, v)) {
                ++m00;
                m10 += static_cast<std::uint64_t>(u);
                m01 += static_cast<std::uint64_t>(v);
            }
        }
    }
    if (m00 == 0)
        throw NoObjectError();
    return {static_cast<double>(m10) / static_cast<double>(m00),
            static_cast<double>(m01) / static_cast<double>(m00), m00};
}

/// Membership at a real-valued image location: nearest-neighbour lookup,
/// rounding halves away from zero. Out-of-bounds (and non-finite) points are
/// outside. Total for every finite input.
inline bool mask_contains(const Mask& m, const Eigen::Vector2d& point) {
    const double x = point.x();
    const double y = point.y();
    // Rounds into [0, width) x [0, height) only inside this open box; testing
    // the box first keeps lround away from values it cannot represent.
    if (!(x > -0.5 && x < m.width - 0.5 && y > -0.5 && y < m.height - 0.5))
        return false;
    const int u = static_cast<int>(std::lround(x));
    const int v = static_cast<int>(std::lround(y));
    return m.at(u, v) != 0;
}

} // namespace lode
