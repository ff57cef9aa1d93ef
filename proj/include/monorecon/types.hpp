#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace monorecon {

using Point2 = Eigen::Vector2d;
using Point3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Matrix34 = Eigen::Matrix<double, 3, 4>;

/// 3D electrode coordinates, millimeters.
using PointSet3 = std::vector<Point3>;

/// Per-frame 2D pixel positions of tracked electrodes. frames[i][e] is
/// electrode e in frame i; every frame holds the same electrode count.
struct Track2D {
    std::vector<std::vector<Point2>> frames;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int electrode_count() const {
        return frames.empty() ? 0 : static_cast<int>(frames.front().size());
    }
};

// ---------------------------------------------------------------------------
// Error types. One exception class per failure mode named in the module
// contracts; all derive from Error so callers can catch coarsely.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& msg) : Error(msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};
struct NonPositiveDepth : Error {
    explicit NonPositiveDepth(const std::string& msg) : Error(msg) {}
};
struct DegenerateProjection : Error {
    explicit DegenerateProjection(const std::string& msg) : Error(msg) {}
};
struct IllConditioned : Error {
    explicit IllConditioned(const std::string& msg) : Error(msg) {}
};
struct DegenerateHistogram : Error {
    explicit DegenerateHistogram(const std::string& msg) : Error(msg) {}
};
struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};
struct OutOfFrame : Error {
    explicit OutOfFrame(const std::string& msg) : Error(msg) {}
};
struct NoDeflection : Error {
    explicit NoDeflection(const std::string& msg) : Error(msg) {}
};
struct DegenerateInput : Error {
    explicit DegenerateInput(const std::string& msg) : Error(msg) {}
};
struct TooFewFrames : Error {
    explicit TooFewFrames(const std::string& msg) : Error(msg) {}
};
struct CountMismatch : Error {
    explicit CountMismatch(const std::string& msg) : Error(msg) {}
};
struct SingularNormalEquations : Error {
    explicit SingularNormalEquations(const std::string& msg) : Error(msg) {}
};

inline Point3 centroid_of(const PointSet3& pts) {
    Point3 c = Point3::Zero();
    for (const auto& p : pts) c += p;
    if (!pts.empty()) c /= static_cast<double>(pts.size());
    return c;
}

}  // namespace monorecon
