#pragma once

// C-arm projection geometry: full-perspective, parallel (affine) and weak
// perspective camera models, and the gantry-angle convention used to build
// extrinsics for the PA / LAT views.

#include "monorecon/types.hpp"

#include <cmath>
#include <sstream>

namespace monorecon {

/// Pixel-grid and optics parameters of one C-arm view. Lengths in mm,
/// pixel density k in px/mm, principal point in px.
struct Intrinsics {
    double f = 1000.0;          ///< focal length, mm
    double k = 512.0 / 178.0;   ///< px per mm on the intensifier
    double u0 = 255.5;
    double v0 = 255.5;
    int image_width = 512;
    int image_height = 512;
    double intensifier_width_mm = 178.0;
    double intensifier_height_mm = 178.0;

    /// Square-image constructor; principal point defaults to the image
    /// center ((W-1)/2, (H-1)/2) in pixel-center coordinates.
    static Intrinsics square(double focal_mm, int image_px, double intensifier_mm) {
        Intrinsics in;
        in.f = focal_mm;
        in.k = static_cast<double>(image_px) / intensifier_mm;
        in.u0 = (image_px - 1) / 2.0;
        in.v0 = (image_px - 1) / 2.0;
        in.image_width = image_px;
        in.image_height = image_px;
        in.intensifier_width_mm = intensifier_mm;
        in.intensifier_height_mm = intensifier_mm;
        in.validate();
        return in;
    }

    /// mm per pixel (= 1/k).
    double resolution_mm_per_px() const { return 1.0 / k; }

    void validate() const {
        if (!(f > 0.0)) throw InvalidConfig("Intrinsics: focal length must be > 0");
        if (!(k > 0.0)) throw InvalidConfig("Intrinsics: pixel density must be > 0");
        if (!(u0 >= 0.0 && u0 < image_width) || !(v0 >= 0.0 && v0 < image_height))
            throw InvalidConfig("Intrinsics: principal point outside image");
    }
};

/// Rigid world-to-camera transform: X_cam = R * X_world + t.
struct Extrinsics {
    Matrix3 R = Matrix3::Identity();
    Point3 t = Point3::Zero();

    void validate() const {
        const double ortho = (R.transpose() * R - Matrix3::Identity()).cwiseAbs().maxCoeff();
        if (ortho > 1e-10) throw InvalidConfig("Extrinsics: R not orthonormal");
        if (std::abs(R.determinant() - 1.0) > 1e-10)
            throw InvalidConfig("Extrinsics: det(R) != +1");
    }
};

/// C-arm gantry orientation plus source-to-isocenter distance.
struct GantryPose {
    double primary_deg = 0.0;
    double secondary_deg = 0.0;
    double source_to_object_mm = 500.0;

    void validate(double focal_mm) const {
        if (!(source_to_object_mm > 0.0))
            throw InvalidConfig("GantryPose: source_to_object_mm must be > 0");
        if (!(source_to_object_mm < focal_mm))
            throw InvalidConfig("GantryPose: object must lie between source and detector");
    }
};

enum class ProjectionVariant { Full, Affine, Weak };

/// 3x4 projection matrix plus the variant it was built as. z_avg is only
/// meaningful for the Weak variant.
struct ProjectionMatrix {
    Matrix34 M = Matrix34::Zero();
    ProjectionVariant variant = ProjectionVariant::Full;
    double z_avg = 0.0;
};

namespace detail {

// Elementary rotations in passive (coordinate-transform) form: R expresses
// world coordinates in the frame of a camera physically rotated by +angle
// about the given world axis. Passive form keeps the depth axis of the
// PA view (+90 deg primary) aligned with +X_world.
inline Matrix3 rot_x_passive(double deg) {
    const double r = deg * M_PI / 180.0;
    const double c = std::cos(r), s = std::sin(r);
    Matrix3 m;
    m << 1, 0, 0,
         0, c, s,
         0, -s, c;
    return m;
}

inline Matrix3 rot_y_passive(double deg) {
    const double r = deg * M_PI / 180.0;
    const double c = std::cos(r), s = std::sin(r);
    Matrix3 m;
    m << c, 0, -s,
         0, 1, 0,
         s, 0, c;
    return m;
}

}  // namespace detail

/// World frame is fixed at the isocenter. The primary angle rotates about
/// the world Y axis, the secondary about the world X axis, composed as
/// R = Ry(primary) * Rx(secondary); the camera looks down +Z after
/// rotation and sits source_to_object_mm behind the isocenter.
inline Extrinsics extrinsics_from_gantry(const GantryPose& pose) {
    Extrinsics e;
    e.R = detail::rot_y_passive(std::fmod(pose.primary_deg, 360.0)) *
          detail::rot_x_passive(std::fmod(pose.secondary_deg, 360.0));
    e.t = Point3(0.0, 0.0, pose.source_to_object_mm);
    e.validate();
    return e;
}

/// Full perspective model: M = K [R|t] with K = [[kf,0,u0],[0,kf,v0],[0,0,1]].
inline ProjectionMatrix full_projection(const Intrinsics& intr, const Extrinsics& extr) {
    intr.validate();
    extr.validate();
    Matrix3 K;
    K << intr.k * intr.f, 0, intr.u0,
         0, intr.k * intr.f, intr.v0,
         0, 0, 1;
    Matrix34 Rt;
    Rt.block<3, 3>(0, 0) = extr.R;
    Rt.col(3) = extr.t;
    ProjectionMatrix p;
    p.M = K * Rt;
    p.variant = ProjectionVariant::Full;
    return p;
}

/// Parallel projection: no focal length in the linear part, unit
/// homogeneous row. Parallel world lines stay parallel in the image.
inline ProjectionMatrix affine_projection(const Intrinsics& intr, const Extrinsics& extr) {
    intr.validate();
    extr.validate();
    ProjectionMatrix p;
    p.M.block<2, 3>(0, 0) = intr.k * extr.R.topRows<2>();
    p.M(0, 3) = intr.k * extr.t.x() + intr.u0;
    p.M(1, 3) = intr.k * extr.t.y() + intr.v0;
    p.M(2, 3) = 1.0;
    p.variant = ProjectionVariant::Affine;
    return p;
}

/// Weak perspective: every point divided by the cloud's average depth
/// z_avg = row3(R)·centroid + tz instead of its own depth.
inline ProjectionMatrix weak_projection(const Intrinsics& intr, const Extrinsics& extr,
                                        const Point3& centroid) {
    intr.validate();
    extr.validate();
    const double z_avg = extr.R.row(2).dot(centroid) + extr.t.z();
    if (!(z_avg > 0.0)) {
        std::ostringstream os;
        os << "weak_projection: centroid depth " << z_avg << " not positive";
        throw NonPositiveDepth(os.str());
    }
    const double fk = intr.f * intr.k;
    ProjectionMatrix p;
    p.M.block<2, 3>(0, 0) = fk * extr.R.topRows<2>();
    p.M(0, 3) = fk * extr.t.x() + intr.u0 * z_avg;
    p.M(1, 3) = fk * extr.t.y() + intr.v0 * z_avg;
    p.M(2, 3) = z_avg;
    p.variant = ProjectionVariant::Weak;
    p.z_avg = z_avg;
    return p;
}

/// Homogeneous projection with perspective division.
inline Point2 project(const ProjectionMatrix& p, const Point3& x) {
    const Eigen::Vector4d xh(x.x(), x.y(), x.z(), 1.0);
    const Eigen::Vector3d m = p.M * xh;
    if (std::abs(m.z()) < 1e-12)
        throw DegenerateProjection("project: homogeneous coordinate vanishes");
    return Point2(m.x() / m.z(), m.y() / m.z());
}

inline std::vector<Point2> project_all(const ProjectionMatrix& p, const PointSet3& pts) {
    std::vector<Point2> out;
    out.reserve(pts.size());
    for (const auto& x : pts) out.push_back(project(p, x));
    return out;
}

}  // namespace monorecon
