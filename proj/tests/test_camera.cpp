// Camera model tests: gantry conventions, the three projection variants and
// their documented relationships.

#include <monorecon/camera.hpp>
#include <monorecon/config.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace monorecon;

namespace {

Intrinsics paper_intrinsics() { return Intrinsics::square(1000.0, 512, 178.0); }

// Independent element-wise composition of the passive Ry(p)*Rx(s) product,
// written out symbol by symbol.
Matrix3 gantry_rotation_oracle(double primary_deg, double secondary_deg) {
    const double p = primary_deg * M_PI / 180.0, s = secondary_deg * M_PI / 180.0;
    const double cp = std::cos(p), sp = std::sin(p), cs = std::cos(s), ss = std::sin(s);
    Matrix3 r;
    r << cp, sp * ss, -sp * cs,
         0.0, cs, ss,
         sp, -cp * ss, cp * cs;
    return r;
}

}  // namespace

TEST_CASE("intrinsics resolution matches the 178mm/512px setup") {
    const Intrinsics in = paper_intrinsics();
    REQUIRE(in.resolution_mm_per_px() == Catch::Approx(178.0 / 512.0).epsilon(1e-12));
    // 0.347 mm/px when written to 3 decimals
    REQUIRE(std::floor(in.resolution_mm_per_px() * 1000.0) / 1000.0 ==
            Catch::Approx(0.347).margin(1e-12));
    REQUIRE_THROWS_AS(Intrinsics::square(-1.0, 512, 178.0), InvalidConfig);
}

TEST_CASE("gantry extrinsics: identity pose") {
    const Extrinsics e = extrinsics_from_gantry({0.0, 0.0, 500.0});
    REQUIRE((e.R - Matrix3::Identity()).norm() < 1e-15);
    REQUIRE(e.t == Point3(0.0, 0.0, 500.0));
}

TEST_CASE("gantry extrinsics: PA and LAT views differ by a 90 degree primary rotation") {
    const Extrinsics pa = extrinsics_from_gantry({90.0, 0.0, 500.0});
    const Extrinsics lat = extrinsics_from_gantry({0.0, 0.0, 500.0});
    const Matrix3 rel = pa.R * lat.R.transpose();
    // rotation angle from the trace
    const double angle = std::acos(std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0));
    REQUIRE(angle == Catch::Approx(M_PI / 2.0).epsilon(1e-12));
    // the primary axis (world Y) is fixed
    REQUIRE((rel * Point3::UnitY() - Point3::UnitY()).norm() < 1e-12);
}

TEST_CASE("gantry extrinsics match the element-wise composition oracle") {
    const Extrinsics e = extrinsics_from_gantry({33.7, -12.4, 480.0});
    REQUIRE((e.R.transpose() * e.R - Matrix3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((e.R - gantry_rotation_oracle(33.7, -12.4)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("gantry extrinsics stay orthonormal over random poses") {
    std::mt19937_64 gen(7);
    for (int i = 0; i < 100; ++i) {
        const double p = (gen() % 72000) / 100.0 - 360.0;
        const double s = (gen() % 72000) / 100.0 - 360.0;
        const Extrinsics e = extrinsics_from_gantry({p, s, 500.0});
        REQUIRE((e.R.transpose() * e.R - Matrix3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
        REQUIRE(e.R.determinant() == Catch::Approx(1.0).margin(1e-10));
    }
}

TEST_CASE("full projection: scale factor and bottom row") {
    const Intrinsics in = paper_intrinsics();
    Extrinsics e;
    e.t = Point3(0.0, 0.0, 500.0);
    const ProjectionMatrix p = full_projection(in, e);
    REQUIRE(std::abs(p.M(0, 0) - 2876.40) < 0.005);  // kf = 1000 * 512/178
    REQUIRE(p.variant == ProjectionVariant::Full);

    const Extrinsics rot = extrinsics_from_gantry({33.7, -12.4, 480.0});
    const ProjectionMatrix pr = full_projection(in, rot);
    for (int c = 0; c < 3; ++c) REQUIRE(pr.M(2, c) == Catch::Approx(rot.R(2, c)).margin(1e-15));
    REQUIRE(pr.M(2, 3) == Catch::Approx(rot.t.z()).margin(1e-15));
}

TEST_CASE("affine projection keeps parallel lines parallel and ignores depth") {
    const Intrinsics in = paper_intrinsics();
    const Extrinsics e = extrinsics_from_gantry({25.0, -40.0, 450.0});
    const ProjectionMatrix p = affine_projection(in, e);
    REQUIRE(p.variant == ProjectionVariant::Affine);
    REQUIRE(p.M(2, 0) == 0.0);
    REQUIRE(p.M(2, 3) == 1.0);

    const Point3 dir(0.3, -0.8, 0.52);
    const Point3 a0(5.0, 2.0, -3.0), b0(-7.0, 4.0, 9.0);
    const Point2 da = project(p, a0 + 4.0 * dir) - project(p, a0);
    const Point2 db = project(p, b0 + 2.5 * dir) - project(p, b0);
    const double cross = da.x() * db.y() - da.y() * db.x();
    REQUIRE(std::abs(cross) / (da.norm() * db.norm()) < 1e-9);

    // identity pose: (X, Y, Z) -> (kX + u0, kY + v0) for any Z
    const ProjectionMatrix pid = affine_projection(in, Extrinsics{});
    for (double z : {-50.0, 0.0, 130.0}) {
        const Point2 q = project(pid, Point3(7.0, -4.0, z));
        REQUIRE(q.x() == Catch::Approx(in.k * 7.0 + in.u0).margin(1e-12));
        REQUIRE(q.y() == Catch::Approx(in.k * -4.0 + in.v0).margin(1e-12));
    }
    // 10 mm in-plane distance maps to exactly 10k px
    const Point2 q0 = project(pid, Point3(0.0, 0.0, 20.0));
    const Point2 q1 = project(pid, Point3(10.0, 0.0, 20.0));
    REQUIRE((q1 - q0).norm() == Catch::Approx(10.0 * in.k).epsilon(1e-12));
}

TEST_CASE("weak projection: average-depth plane, formula and error model") {
    const Intrinsics in = paper_intrinsics();
    Extrinsics e;
    e.t = Point3(0.0, 0.0, 500.0);

    // z_avg formula: centroid at the origin, t = (0,0,500), R = I
    const ProjectionMatrix pw = weak_projection(in, e, Point3::Zero());
    REQUIRE(pw.z_avg == Catch::Approx(500.0).margin(1e-12));
    REQUIRE(pw.M(2, 3) == Catch::Approx(500.0).margin(1e-12));
    REQUIRE(pw.variant == ProjectionVariant::Weak);

    // points exactly on the average-depth plane project identically
    const Extrinsics rot = extrinsics_from_gantry({18.0, 33.0, 470.0});
    const double z_plane = 470.0;
    PointSet3 world;
    for (double x : {-12.0, 0.0, 9.0})
        for (double y : {-6.0, 4.0})
            world.push_back(rot.R.transpose() * (Point3(x, y, z_plane) - rot.t));
    const Point3 centroid = centroid_of(world);
    const ProjectionMatrix weak = weak_projection(in, rot, centroid);
    const ProjectionMatrix full = full_projection(in, rot);
    REQUIRE(weak.z_avg == Catch::Approx(z_plane).margin(1e-9));
    for (const auto& w : world)
        REQUIRE((project(weak, w) - project(full, w)).norm() < 1e-9);

    // 10 mm depth offset: discrepancy equals the direct two-model evaluation
    const double kf = in.f * in.k;
    const double z_avg = 500.0, dz = 10.0, x_off = 30.0;
    const ProjectionMatrix weak2 = weak_projection(in, e, Point3::Zero());
    const ProjectionMatrix full2 = full_projection(in, e);
    const Point3 pt(x_off, 0.0, z_avg + dz - 500.0);
    const double u_full = kf * x_off / (z_avg + dz) + in.u0;
    const double u_weak = kf * x_off / z_avg + in.u0;
    const Point2 qf = project(full2, pt), qw = project(weak2, pt);
    REQUIRE(qf.x() == Catch::Approx(u_full).margin(1e-9));
    REQUIRE(qw.x() == Catch::Approx(u_weak).margin(1e-9));
    REQUIRE(std::abs(qw.x() - qf.x()) ==
            Catch::Approx(std::abs(u_weak - u_full)).margin(1e-9));

    // centroid behind the source
    REQUIRE_THROWS_AS(weak_projection(in, Extrinsics{}, Point3(0.0, 0.0, -1.0)),
                      NonPositiveDepth);
}

TEST_CASE("weak-to-full convergence bound over depth extents") {
    const Intrinsics in = paper_intrinsics();
    Extrinsics e;
    e.t = Point3(0.0, 0.0, 500.0);
    const double kf = in.f * in.k, z_avg = 500.0;
    const ProjectionMatrix full = full_projection(in, e);
    for (double delta : {1.0, 5.0, 20.0}) {
        // symmetric cloud keeps the centroid depth at exactly z_avg
        PointSet3 cloud;
        for (double x : {-40.0, -10.0, 25.0, 40.0})
            for (double y : {-30.0, 15.0})
                for (double s : {-1.0, 1.0}) cloud.push_back(Point3(x, y, s * delta));
        const ProjectionMatrix weak = weak_projection(in, e, centroid_of(cloud));
        REQUIRE(weak.z_avg == Catch::Approx(z_avg).margin(1e-9));
        for (const auto& pt : cloud) {
            const double err = (project(weak, pt) - project(full, pt)).norm();
            const double bound =
                kf * pt.head<2>().norm() * delta / (z_avg * (z_avg - delta));
            REQUIRE(err <= bound + 1e-9);
        }
    }
}

TEST_CASE("project: optical axis, weak division, homogeneous oracle") {
    const Intrinsics in = paper_intrinsics();
    const ProjectionMatrix full = full_projection(in, Extrinsics{});
    for (double z : {10.0, 250.0, 900.0}) {
        const Point2 q = project(full, Point3(0.0, 0.0, z));
        REQUIRE(q.x() == Catch::Approx(in.u0).margin(1e-12));
        REQUIRE(q.y() == Catch::Approx(in.v0).margin(1e-12));
    }

    // weak variant divides every point by the same constant
    Extrinsics e;
    e.t = Point3(0.0, 0.0, 500.0);
    const ProjectionMatrix weak = weak_projection(in, e, Point3::Zero());
    REQUIRE(weak.M(2, 0) == 0.0);
    REQUIRE(weak.M(2, 1) == 0.0);
    REQUIRE(weak.M(2, 2) == 0.0);
    REQUIRE(weak.M(2, 3) == Catch::Approx(weak.z_avg));

    // brute-force homogeneous multiply + divide
    std::mt19937_64 gen(11);
    auto u = [&gen] { return (gen() % 2000000) / 1000000.0 - 1.0; };
    for (int trial = 0; trial < 50; ++trial) {
        ProjectionMatrix p;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) p.M(r, c) = u();
        const Point3 x(10.0 * u(), 10.0 * u(), 10.0 * u());
        const double w = p.M(2, 0) * x.x() + p.M(2, 1) * x.y() + p.M(2, 2) * x.z() + p.M(2, 3);
        if (std::abs(w) < 1e-3) continue;
        const double uu =
            (p.M(0, 0) * x.x() + p.M(0, 1) * x.y() + p.M(0, 2) * x.z() + p.M(0, 3)) / w;
        const double vv =
            (p.M(1, 0) * x.x() + p.M(1, 1) * x.y() + p.M(1, 2) * x.z() + p.M(1, 3)) / w;
        const Point2 q = project(p, x);
        REQUIRE(q.x() == Catch::Approx(uu).margin(1e-12));
        REQUIRE(q.y() == Catch::Approx(vv).margin(1e-12));
    }

    ProjectionMatrix degenerate;
    degenerate.M.setZero();
    degenerate.M(0, 0) = 1.0;
    REQUIRE_THROWS_AS(project(degenerate, Point3(1.0, 2.0, 3.0)), DegenerateProjection);
}

TEST_CASE("projection is invariant under uniform scaling of M") {
    const Intrinsics in = paper_intrinsics();
    Extrinsics e = extrinsics_from_gantry({40.0, -15.0, 500.0});
    const ProjectionMatrix p = full_projection(in, e);
    ProjectionMatrix scaled = p;
    scaled.M *= 7.3;
    std::mt19937_64 gen(3);
    auto u = [&gen] { return (gen() % 2000000) / 1000000.0 - 1.0; };
    for (int i = 0; i < 100; ++i) {
        const Point3 x(30.0 * u(), 30.0 * u(), 30.0 * u());
        REQUIRE((project(p, x) - project(scaled, x)).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("gantry config files parse and reject unknown keys") {
    const std::string text =
        "# paper geometry\n"
        "focal_length_mm=1000\n"
        "image_px=512\n"
        "intensifier_mm=178\n"
        "primary_deg=90\n"
        "secondary_deg=0\n"
        "source_to_object_mm=500  # isocenter distance\n";
    const GantryConfig g = gantry_from_keyvalues(KeyValueFile::parse_text(text));
    REQUIRE(g.intrinsics.f == 1000.0);
    REQUIRE(g.intrinsics.image_width == 512);
    REQUIRE(g.pose.primary_deg == 90.0);

    REQUIRE_THROWS_AS(
        gantry_from_keyvalues(KeyValueFile::parse_text(text + "mystery_key=3\n")),
        InvalidConfig);
    REQUIRE_THROWS_AS(gantry_from_keyvalues(KeyValueFile::parse_text("focal_length_mm=1000\n")),
                      InvalidConfig);
    // object behind the detector
    REQUIRE_THROWS_AS(gantry_from_keyvalues(KeyValueFile::parse_text(
                          "focal_length_mm=1000\nimage_px=512\nintensifier_mm=178\n"
                          "primary_deg=0\nsecondary_deg=0\nsource_to_object_mm=1200\n")),
                      InvalidConfig);
}
