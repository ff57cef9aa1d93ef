// Synthetic sequence generator tests: helix parametrization, rigid motion,
// noise bounds, determinism and the error report.

#include <monorecon/reconstruct.hpp>
#include <monorecon/simulate.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace monorecon;

namespace {

GantryConfig paper_gantry(double primary_deg) {
    GantryConfig g;
    g.intrinsics = Intrinsics::square(1000.0, 512, 178.0);
    g.pose = {primary_deg, 0.0, 500.0};
    return g;
}

RigidMotion paper_motion() { return RigidMotion{0.5, 0.5, 0.5, Point3(1.0, 1.0, 1.0)}; }

}  // namespace

TEST_CASE("helix: two-point, one-turn endpoints separate axially by the pitch") {
    HelixSpec spec;
    spec.n_points = 2;
    spec.radius_mm = 7.0;
    spec.pitch_mm = 11.0;
    spec.turns = 1.0;
    spec.axis = Point3(0.0, 0.0, 1.0);
    const PointSet3 pts = make_helix(spec);
    REQUIRE(pts.size() == 2);
    const Point3 d = pts[1] - pts[0];
    REQUIRE(d.norm() == Catch::Approx(11.0).margin(1e-9));          // purely axial
    REQUIRE(std::abs(d.dot(spec.axis)) == Catch::Approx(11.0).margin(1e-9));
}

TEST_CASE("helix: default spec has 30 points and centroid on the requested center") {
    HelixSpec spec;  // defaults
    const PointSet3 pts = make_helix(spec);
    REQUIRE(pts.size() == 30);
    REQUIRE(centroid_of(pts).norm() < 1e-9);

    spec.center_mm = Point3(4.0, -2.0, 11.0);
    const PointSet3 moved = make_helix(spec);
    REQUIRE((centroid_of(moved) - spec.center_mm).norm() < 1e-9);
}

TEST_CASE("helix: consecutive spacing matches the closed-form chord of the arc parametrization") {
    HelixSpec spec;
    spec.n_points = 23;
    spec.radius_mm = 6.5;
    spec.pitch_mm = 9.0;
    spec.turns = 1.8;
    spec.axis = Point3(1.0, 2.0, -0.5).normalized();
    const PointSet3 pts = make_helix(spec);
    // uniform arc parameter: angular gap 2 pi T ds, axial gap P T ds
    const double ds = 1.0 / (spec.n_points - 1);
    const double chord =
        std::sqrt(std::pow(2.0 * spec.radius_mm * std::sin(M_PI * spec.turns * ds), 2) +
                  std::pow(spec.pitch_mm * spec.turns * ds, 2));
    for (size_t i = 0; i + 1 < pts.size(); ++i)
        REQUIRE((pts[i + 1] - pts[i]).norm() == Catch::Approx(chord).margin(1e-9));
}

TEST_CASE("rigid transform: identity, composition and distance preservation") {
    const PointSet3 helix = make_helix(HelixSpec{});
    const RigidMotion none{0.0, 0.0, 0.0, Point3::Zero()};
    const PointSet3 same = rigid_transform(helix, none);
    for (size_t i = 0; i < helix.size(); ++i) REQUIRE((same[i] - helix[i]).norm() < 1e-12);

    // applying m twice equals the composed transform (R^2, R T + T)
    const RigidMotion m{3.0, -2.0, 5.0, Point3(1.0, -2.0, 0.5)};
    const PointSet3 twice = rigid_transform(rigid_transform(helix, m), m);
    const Matrix3 r = rigid_rotation(m);
    const Matrix3 r2 = r * r;
    const Point3 t2 = r * m.t_mm + m.t_mm;
    for (size_t i = 0; i < helix.size(); ++i)
        REQUIRE((twice[i] - (r2 * helix[i] + t2)).norm() < 1e-10);

    std::mt19937_64 gen(5);
    auto u = [&gen](double a) { return ((gen() % 2000001) / 1000000.0 - 1.0) * a; };
    for (int trial = 0; trial < 30; ++trial) {
        const RigidMotion rnd{u(180.0), u(180.0), u(180.0), Point3(u(20.0), u(20.0), u(20.0))};
        const PointSet3 moved = rigid_transform(helix, rnd);
        for (size_t i = 0; i + 1 < helix.size(); ++i) {
            const double before = (helix[i + 1] - helix[i]).norm();
            const double after = (moved[i + 1] - moved[i]).norm();
            REQUIRE(after == Catch::Approx(before).margin(1e-9));
        }
    }
}

TEST_CASE("paper motion keeps every interframe 2D displacement under ten pixels") {
    const SyntheticSequence seq = generate_sequence(HelixSpec{}, paper_motion(), 6,
                                                    paper_gantry(90.0), paper_gantry(0.0), 0.0, 1);
    for (const Track2D* track : {&seq.tracks_a, &seq.tracks_b}) {
        for (int f = 1; f < track->frame_count(); ++f)
            for (int e = 0; e < track->electrode_count(); ++e)
                REQUIRE((track->frames[f][e] - track->frames[f - 1][e]).norm() < 10.0);
    }
}

TEST_CASE("generate_sequence: frame count, noiseless equality, noise bound") {
    const HelixSpec helix;
    const SyntheticSequence clean = generate_sequence(helix, paper_motion(), 6,
                                                      paper_gantry(90.0), paper_gantry(0.0),
                                                      0.0, 9);
    REQUIRE(clean.frames.size() == 6);  // t=0 plus five motion steps
    // truth equals motion applied i times; observed equals truth when noise is off
    PointSet3 expect = make_helix(helix);
    for (size_t f = 0; f < clean.frames.size(); ++f) {
        if (f > 0) expect = rigid_transform(expect, paper_motion());
        for (size_t e = 0; e < expect.size(); ++e) {
            REQUIRE((clean.frames[f].truth3d[e] - expect[e]).norm() < 1e-12);
            REQUIRE((clean.frames[f].observed3d[e] - expect[e]).norm() < 1e-12);
        }
    }

    const SyntheticSequence noisy = generate_sequence(helix, paper_motion(), 6,
                                                      paper_gantry(90.0), paper_gantry(0.0),
                                                      2.0, 9);
    bool any_moved = false;
    for (size_t f = 0; f < noisy.frames.size(); ++f)
        for (size_t e = 0; e < noisy.frames[f].truth3d.size(); ++e) {
            const Point3 d = noisy.frames[f].observed3d[e] - noisy.frames[f].truth3d[e];
            REQUIRE(d.cwiseAbs().maxCoeff() <= 2.0);
            if (d.norm() > 0.0) any_moved = true;
        }
    REQUIRE(any_moved);
}

TEST_CASE("generate_sequence is deterministic for a fixed seed") {
    const auto a = generate_sequence(HelixSpec{}, paper_motion(), 6, paper_gantry(90.0),
                                     paper_gantry(0.0), 2.0, 1234);
    const auto b = generate_sequence(HelixSpec{}, paper_motion(), 6, paper_gantry(90.0),
                                     paper_gantry(0.0), 2.0, 1234);
    const auto c = generate_sequence(HelixSpec{}, paper_motion(), 6, paper_gantry(90.0),
                                     paper_gantry(0.0), 2.0, 1235);
    bool identical = true, differs = false;
    for (size_t f = 0; f < a.frames.size(); ++f)
        for (size_t e = 0; e < a.frames[f].observed3d.size(); ++e) {
            if (a.frames[f].observed3d[e] != b.frames[f].observed3d[e]) identical = false;
            if (a.frames[f].observed3d[e] != c.frames[f].observed3d[e]) differs = true;
        }
    REQUIRE(identical);
    REQUIRE(differs);
}

TEST_CASE("noiseless tracks triangulate back to the truth") {
    const SyntheticSequence seq = generate_sequence(HelixSpec{}, paper_motion(), 6,
                                                    paper_gantry(90.0), paper_gantry(0.0),
                                                    0.0, 21);
    const ProjectionMatrix pa = seq.gantry_a.full();
    const ProjectionMatrix pb = seq.gantry_b.full();
    for (size_t f = 0; f < seq.frames.size(); ++f)
        for (size_t e = 0; e < seq.frames[f].truth3d.size(); ++e) {
            const Point3 rec =
                triangulate(pa, pb, seq.tracks_a.frames[f][e], seq.tracks_b.frames[f][e]).point;
            REQUIRE((rec - seq.frames[f].truth3d[e]).norm() < 1e-6);
        }
}

TEST_CASE("rms3d_report: zeros, 3-4-5 offset, shape mismatch") {
    const PointSet3 frame = {Point3(1.0, 2.0, 3.0), Point3(-1.0, 0.5, 2.0)};
    const RmsReport zero = rms3d_report({frame}, {frame});
    REQUIRE(zero.mean == 0.0);
    REQUIRE(zero.min == 0.0);
    REQUIRE(zero.max == 0.0);
    REQUIRE(zero.rms_accumulated == 0.0);

    const PointSet3 truth = {Point3::Zero()};
    const PointSet3 est = {Point3(3.0, 4.0, 0.0)};
    const RmsReport five = rms3d_report({est}, {truth});
    REQUIRE(five.mean == Catch::Approx(5.0));
    REQUIRE(five.min == Catch::Approx(5.0));
    REQUIRE(five.max == Catch::Approx(5.0));
    REQUIRE(five.rms_accumulated == Catch::Approx(5.0));

    REQUIRE_THROWS_AS(rms3d_report({truth}, {truth, truth}), ShapeMismatch);
    REQUIRE_THROWS_AS(rms3d_report({truth}, {frame}), ShapeMismatch);
}

TEST_CASE("render_frame: center minimum, bounds check, size, determinism") {
    const std::vector<Point2> single = {Point2(256.0, 256.0)};
    const GrayImage img = render_frame(single, 512, 4.0, 0.0, 77);
    REQUIRE(img.width == 512);
    REQUIRE(img.height == 512);
    size_t argmin = 0;
    for (size_t i = 0; i < img.size(); ++i)
        if (img.pixels[i] < img.pixels[argmin]) argmin = i;
    REQUIRE(argmin % 512 == 256);
    REQUIRE(argmin / 512 == 256);

    REQUIRE_THROWS_AS(render_frame({Point2(-3.0, 10.0)}, 512, 4.0, 0.0, 1), OutOfFrame);
    REQUIRE_THROWS_AS(render_frame({Point2(10.0, 600.0)}, 512, 4.0, 0.0, 1), OutOfFrame);

    const GrayImage n1 = render_frame(single, 512, 4.0, 0.05, 123);
    const GrayImage n2 = render_frame(single, 512, 4.0, 0.05, 123);
    REQUIRE(pgm_to_bytes(n1) == pgm_to_bytes(n2));
    const GrayImage n3 = render_frame(single, 512, 4.0, 0.05, 124);
    REQUIRE(pgm_to_bytes(n1) != pgm_to_bytes(n3));
}
