#pragma once

// Synthetic experiment generator: helix phantom, rigid interframe motion,
// biplane projected tracks with bounded coordinate noise, and rendered
// fluoroscopy-like frames for segmentation tests.

#include "monorecon/camera.hpp"
#include "monorecon/config.hpp"
#include "monorecon/image.hpp"
#include "monorecon/types.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace monorecon {

struct HelixSpec {
    int n_points = 30;
    double radius_mm = 5.0;
    double pitch_mm = 10.0;  ///< axial advance per turn
    double turns = 1.5;
    Point3 center_mm = Point3::Zero();
    Point3 axis = Point3(std::sin(M_PI / 6.0), 0.0, std::cos(M_PI / 6.0));

    void validate() const {
        if (n_points < 2) throw InvalidConfig("helix: need at least 2 points");
        if (!(radius_mm > 0.0)) throw InvalidConfig("helix: radius must be > 0");
        if (std::abs(axis.norm() - 1.0) > 1e-12)
            throw InvalidConfig("helix: axis must be unit length");
    }
};

/// Euler angles (deg) and translation (mm) of one interframe motion step,
/// applied as X' = Rz(psi) Ry(phi) Rx(theta) X + T about the world origin.
struct RigidMotion {
    double theta_deg = 0.5;
    double phi_deg = 0.5;
    double psi_deg = 0.5;
    Point3 t_mm = Point3(1.0, 1.0, 1.0);
};

namespace detail {

// Active right-handed elementary rotations (world-frame motion).
inline Matrix3 rot_x_active(double deg) {
    const double r = deg * M_PI / 180.0, c = std::cos(r), s = std::sin(r);
    Matrix3 m;
    m << 1, 0, 0, 0, c, -s, 0, s, c;
    return m;
}
inline Matrix3 rot_y_active(double deg) {
    const double r = deg * M_PI / 180.0, c = std::cos(r), s = std::sin(r);
    Matrix3 m;
    m << c, 0, s, 0, 1, 0, -s, 0, c;
    return m;
}
inline Matrix3 rot_z_active(double deg) {
    const double r = deg * M_PI / 180.0, c = std::cos(r), s = std::sin(r);
    Matrix3 m;
    m << c, -s, 0, s, c, 0, 0, 0, 1;
    return m;
}

/// uniform double in [0, 1) with the full 53-bit mantissa
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline double uniform_pm(std::mt19937_64& gen, double a) {
    return (2.0 * uniform01(gen) - 1.0) * a;
}

/// standard normal via Box-Muller (no library distribution, so the byte
/// stream is identical across standard libraries)
inline double gauss(std::mt19937_64& gen) {
    const double u1 = 1.0 - uniform01(gen);
    const double u2 = uniform01(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// uniform in the closed ball of the given radius (rejection from the box)
inline Point3 uniform_ball(std::mt19937_64& gen, double radius) {
    while (true) {
        const Point3 e(uniform_pm(gen, radius), uniform_pm(gen, radius),
                       uniform_pm(gen, radius));
        if (e.norm() <= radius) return e;
    }
}

}  // namespace detail

inline Matrix3 rigid_rotation(const RigidMotion& m) {
    return detail::rot_z_active(m.psi_deg) * detail::rot_y_active(m.phi_deg) *
           detail::rot_x_active(m.theta_deg);
}

inline PointSet3 rigid_transform(const PointSet3& pts, const RigidMotion& m) {
    const Matrix3 r = rigid_rotation(m);
    PointSet3 out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(r * p + m.t_mm);
    return out;
}

/// Helix sampled uniformly in arc parameter; the point centroid lands
/// exactly on center_mm.
inline PointSet3 make_helix(const HelixSpec& spec) {
    spec.validate();
    // orthonormal frame with e3 = axis
    const Point3 e3 = spec.axis;
    Point3 seed = std::abs(e3.z()) < 0.9 ? Point3(0, 0, 1) : Point3(1, 0, 0);
    const Point3 e1 = (seed - seed.dot(e3) * e3).normalized();
    const Point3 e2 = e3.cross(e1);

    PointSet3 pts;
    pts.reserve(spec.n_points);
    for (int i = 0; i < spec.n_points; ++i) {
        const double s = static_cast<double>(i) / (spec.n_points - 1);
        const double angle = 2.0 * M_PI * spec.turns * s;
        const double axial = spec.pitch_mm * spec.turns * s;
        pts.push_back(e1 * (spec.radius_mm * std::cos(angle)) +
                      e2 * (spec.radius_mm * std::sin(angle)) + e3 * axial);
    }
    const Point3 c = centroid_of(pts);
    for (auto& p : pts) p += spec.center_mm - c;
    return pts;
}

/// One synthetic biplane acquisition. Frame 0 is the a priori instant.
/// truth3d is the noise-free rigid-motion trajectory; observed3d carries the
/// per-frame coordinate perturbations and is what the tracks project.
struct SyntheticSequence {
    struct Frame {
        PointSet3 truth3d;
        PointSet3 observed3d;
    };
    std::vector<Frame> frames;
    Track2D tracks_a;
    Track2D tracks_b;
    GantryConfig gantry_a;
    GantryConfig gantry_b;
    std::uint64_t seed = 0;
};

/// Applies the motion step n_frames-1 times beyond t=0, perturbs each
/// frame's coordinates with noise bounded by noise_mm per axis, and projects
/// the perturbed points through both views. Deterministic for a fixed seed.
inline SyntheticSequence generate_sequence(const HelixSpec& spec, const RigidMotion& motion,
                                           int n_frames, const GantryConfig& gantry_a,
                                           const GantryConfig& gantry_b, double noise_mm,
                                           std::uint64_t seed) {
    if (n_frames < 2) throw InvalidConfig("generate_sequence: need at least 2 frames");
    SyntheticSequence seq;
    seq.gantry_a = gantry_a;
    seq.gantry_b = gantry_b;
    seq.seed = seed;
    const ProjectionMatrix pa = gantry_a.full();
    const ProjectionMatrix pb = gantry_b.full();

    std::mt19937_64 gen(seed);
    PointSet3 truth = make_helix(spec);
    for (int f = 0; f < n_frames; ++f) {
        if (f > 0) truth = rigid_transform(truth, motion);
        SyntheticSequence::Frame frame;
        frame.truth3d = truth;
        frame.observed3d = truth;
        if (noise_mm > 0.0)
            for (auto& p : frame.observed3d) p += detail::uniform_ball(gen, noise_mm);
        seq.tracks_a.frames.push_back(project_all(pa, frame.observed3d));
        seq.tracks_b.frames.push_back(project_all(pb, frame.observed3d));
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

/// Synthetic fluoroscopy frame: dark soft-edged disks on a bright textured
/// background plus additive Gaussian noise. Deterministic per seed.
inline GrayImage render_frame(const std::vector<Point2>& points, int image_size,
                              double electrode_radius_px, double noise_sigma,
                              std::uint64_t seed) {
    for (const auto& p : points)
        if (p.x() < 0.0 || p.x() > image_size - 1 || p.y() < 0.0 || p.y() > image_size - 1)
            throw OutOfFrame("render_frame: electrode outside image bounds");

    std::mt19937_64 gen(seed);
    const double phase1 = detail::uniform01(gen) * 2.0 * M_PI;
    const double phase2 = detail::uniform01(gen) * 2.0 * M_PI;
    const double phase3 = detail::uniform01(gen) * 2.0 * M_PI;

    GrayImage img(image_size, image_size);
    const double inv = 1.0 / image_size;
    for (int r = 0; r < image_size; ++r) {
        for (int c = 0; c < image_size; ++c) {
            const double x = c * inv, y = r * inv;
            img.at(r, c) = 0.85 + 0.02 * std::sin(2.0 * M_PI * (1.3 * x + 0.7 * y) + phase1) +
                           0.015 * std::sin(2.0 * M_PI * (2.1 * y - 0.9 * x) + phase2) +
                           0.005 * std::sin(2.0 * M_PI * (3.0 * x + 2.2 * y) + phase3);
        }
    }

    // logistic radial profile, ~1 px soft edge
    const double amp = 0.55, edge = 0.8;
    const int pad = static_cast<int>(std::ceil(electrode_radius_px + 5.0 * edge));
    for (const auto& p : points) {
        const int r0 = std::max(0, static_cast<int>(std::floor(p.y())) - pad);
        const int r1 = std::min(image_size - 1, static_cast<int>(std::ceil(p.y())) + pad);
        const int c0 = std::max(0, static_cast<int>(std::floor(p.x())) - pad);
        const int c1 = std::min(image_size - 1, static_cast<int>(std::ceil(p.x())) + pad);
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double d = std::hypot(c - p.x(), r - p.y());
                img.at(r, c) -= amp / (1.0 + std::exp((d - electrode_radius_px) / edge));
            }
        }
    }

    if (noise_sigma > 0.0)
        for (double& v : img.pixels) v += noise_sigma * detail::gauss(gen);
    for (double& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
    return img;
}

struct RmsReport {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double rms_accumulated = 0.0;  ///< sum over frames of per-frame 3D RMS
    std::vector<double> per_frame_rms;
};

/// Pools per-point per-frame Euclidean errors for mean/min/max and sums the
/// per-frame RMS values into the accumulated figure.
inline RmsReport rms3d_report(const std::vector<PointSet3>& est,
                              const std::vector<PointSet3>& truth) {
    if (est.size() != truth.size())
        throw ShapeMismatch("rms3d_report: frame count mismatch");
    if (est.empty()) throw ShapeMismatch("rms3d_report: no frames");
    RmsReport rep;
    rep.min = std::numeric_limits<double>::infinity();
    rep.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    long count = 0;
    for (size_t f = 0; f < est.size(); ++f) {
        if (est[f].size() != truth[f].size())
            throw ShapeMismatch("rms3d_report: point count mismatch");
        if (est[f].empty()) throw ShapeMismatch("rms3d_report: empty frame");
        double sq = 0.0;
        for (size_t i = 0; i < est[f].size(); ++i) {
            const double e = (est[f][i] - truth[f][i]).norm();
            sum += e;
            ++count;
            rep.min = std::min(rep.min, e);
            rep.max = std::max(rep.max, e);
            sq += e * e;
        }
        const double frame_rms = std::sqrt(sq / static_cast<double>(est[f].size()));
        rep.per_frame_rms.push_back(frame_rms);
        rep.rms_accumulated += frame_rms;
    }
    rep.mean = sum / static_cast<double>(count);
    return rep;
}

}  // namespace monorecon
