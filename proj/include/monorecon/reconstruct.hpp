#pragma once

// Two-view triangulation, the a priori monoplane displacement system and its
// Levenberg-Marquardt solver, and diastolic frame selection.

#include "monorecon/camera.hpp"
#include "monorecon/image.hpp"
#include "monorecon/simulate.hpp"
#include "monorecon/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace monorecon {

// --- Two-view triangulation --------------------------------------------------

struct TriangulationResult {
    Point3 point = Point3::Zero();
    double reprojection_rms_px = 0.0;
};

/// Linear least-squares solution of the four projection constraints from two
/// full-perspective views of a single point.
inline TriangulationResult triangulate(const ProjectionMatrix& pa, const ProjectionMatrix& pb,
                                       const Point2& ma, const Point2& mb) {
    if (pa.variant != ProjectionVariant::Full || pb.variant != ProjectionVariant::Full)
        throw InvalidConfig("triangulate: both projection matrices must be Full variant");
    Eigen::Matrix<double, 4, 3> a;
    Eigen::Vector4d b;
    const ProjectionMatrix* mats[2] = {&pa, &pb};
    const Point2* pix[2] = {&ma, &mb};
    for (int v = 0; v < 2; ++v) {
        const Matrix34& m = mats[v]->M;
        const double u = pix[v]->x(), w = pix[v]->y();
        a.row(2 * v) = m.block<1, 3>(0, 0) - u * m.block<1, 3>(2, 0);
        b(2 * v) = u * m(2, 3) - m(0, 3);
        a.row(2 * v + 1) = m.block<1, 3>(1, 0) - w * m.block<1, 3>(2, 0);
        b(2 * v + 1) = w * m(2, 3) - m(1, 3);
    }
    Eigen::JacobiSVD<Eigen::Matrix<double, 4, 3>> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(2) <= 0.0 || sv(0) / sv(2) > 1e10)
        throw IllConditioned("triangulate: near-parallel viewing rays");
    TriangulationResult res;
    res.point = svd.solve(b);
    double sq = 0.0;
    for (int v = 0; v < 2; ++v) {
        const Point2 reproj = project(*mats[v], res.point);
        sq += (reproj - *pix[v]).squaredNorm();
    }
    res.reprojection_rms_px = std::sqrt(sq / 4.0);
    return res;
}

inline PointSet3 to_camera_frame(const PointSet3& points_world, const Extrinsics& extr) {
    PointSet3 out;
    out.reserve(points_world.size());
    for (const auto& p : points_world) out.push_back(extr.R * p + extr.t);
    return out;
}

// --- A priori model and displacement chains ----------------------------------

enum class AprioriSource { Biplane, External };

/// Electrode coordinates at t=0, expressed in the reconstructing camera's
/// frame so Z is electrode depth.
struct AprioriModel {
    PointSet3 points0;
    AprioriSource source = AprioriSource::Biplane;

    void validate() const {
        for (const auto& p : points0)
            if (!(p.z() > 0.0))
                throw NonPositiveDepth("AprioriModel: all depths must be positive");
    }
};

/// Per-electrode chains of (dx, dy, dz) for frame pairs (i, i+1), i = 0..N-2.
struct DisplacementVector {
    std::vector<std::vector<Point3>> per_electrode;
};

/// Parallel back-projection initialization: dx = du * Z0 / (kf),
/// dy = dv * Z0 / (kf) at the a priori depth, dz = dz_guess for every pair.
/// Expects the camera-frame convention (projection built with identity
/// extrinsics) so that M(0,0) = k*f.
inline DisplacementVector init_displacements(const Track2D& track, const AprioriModel& apriori,
                                             const ProjectionMatrix& p, double dz_guess_mm) {
    if (track.frame_count() < 2)
        throw TooFewFrames("init_displacements: need at least 2 frames");
    if (track.electrode_count() != static_cast<int>(apriori.points0.size()))
        throw CountMismatch("init_displacements: track/apriori electrode counts differ");
    const double kf = p.M(0, 0);
    DisplacementVector d;
    d.per_electrode.resize(apriori.points0.size());
    for (size_t e = 0; e < apriori.points0.size(); ++e) {
        const double z0 = apriori.points0[e].z();
        for (int i = 0; i + 1 < track.frame_count(); ++i) {
            const Point2 delta = track.frames[i + 1][e] - track.frames[i][e];
            d.per_electrode[e].push_back(
                Point3(delta.x() * z0 / kf, delta.y() * z0 / kf, dz_guess_mm));
        }
    }
    return d;
}

namespace detail {

/// Residuals of one electrode's chain, frame-major [u, v, d] for frames
/// 1..N-1: two projection residuals against the measured track and one
/// residual on the consecutive-frame pixel distance.
inline Eigen::VectorXd electrode_residuals(const Point3& x0,
                                           const std::vector<Point2>& track_e,
                                           const ProjectionMatrix& p,
                                           const Eigen::VectorXd& chain) {
    const int n_frames = static_cast<int>(track_e.size());
    const int n_pairs = n_frames - 1;
    Eigen::VectorXd r(3 * n_pairs);
    Point3 pos = x0;
    Point2 prev_proj = project(p, x0);
    for (int i = 1; i < n_frames; ++i) {
        pos += Point3(chain(3 * (i - 1)), chain(3 * (i - 1) + 1), chain(3 * (i - 1) + 2));
        const Point2 proj = project(p, pos);
        const double d_pred = (proj - prev_proj).norm();
        const double d_meas = (track_e[i] - track_e[i - 1]).norm();
        r(3 * (i - 1)) = proj.x() - track_e[i].x();
        r(3 * (i - 1) + 1) = proj.y() - track_e[i].y();
        r(3 * (i - 1) + 2) = d_pred - d_meas;
        prev_proj = proj;
    }
    return r;
}

}  // namespace detail

/// Full residual vector over every electrode, ordered frame-major, then
/// electrode, then [u, v, d].
inline Eigen::VectorXd assemble_residuals(const AprioriModel& apriori, const Track2D& track,
                                          const ProjectionMatrix& p,
                                          const DisplacementVector& x) {
    apriori.validate();
    const int n_frames = track.frame_count();
    const int n_electrodes = track.electrode_count();
    if (n_frames < 2) throw TooFewFrames("assemble_residuals: need at least 2 frames");
    if (n_electrodes != static_cast<int>(apriori.points0.size()) ||
        n_electrodes != static_cast<int>(x.per_electrode.size()))
        throw CountMismatch("assemble_residuals: electrode count mismatch");

    std::vector<Eigen::VectorXd> per_e(n_electrodes);
    for (int e = 0; e < n_electrodes; ++e) {
        if (static_cast<int>(x.per_electrode[e].size()) != n_frames - 1)
            throw ShapeMismatch("assemble_residuals: chain length != frames-1");
        Eigen::VectorXd chain(3 * (n_frames - 1));
        for (int i = 0; i + 1 < n_frames; ++i) chain.segment<3>(3 * i) = x.per_electrode[e][i];
        std::vector<Point2> track_e;
        for (int i = 0; i < n_frames; ++i) track_e.push_back(track.frames[i][e]);
        per_e[e] = detail::electrode_residuals(apriori.points0[e], track_e, p, chain);
    }
    Eigen::VectorXd r(3 * (n_frames - 1) * n_electrodes);
    int idx = 0;
    for (int i = 0; i + 1 < n_frames; ++i)
        for (int e = 0; e < n_electrodes; ++e)
            for (int k = 0; k < 3; ++k) r(idx++) = per_e[e](3 * i + k);
    return r;
}

// --- Levenberg-Marquardt ------------------------------------------------------

struct LmOptions {
    double lambda0 = 1e-3;
    double lambda_up = 10.0;
    double lambda_down = 0.1;
    int max_iterations = 200;
    double step_tol = 1e-10;
    double grad_tol = 1e-10;

    void validate() const {
        if (!(lambda0 > 0.0 && lambda_up > 1.0 && lambda_down > 0.0 && lambda_down < 1.0 &&
              max_iterations > 0 && step_tol > 0.0 && grad_tol > 0.0))
            throw InvalidConfig("LmOptions: invalid settings");
    }
};

struct LmResult {
    Eigen::VectorXd x;
    bool converged = false;
    int iterations = 0;
    double final_norm = 0.0;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Forward-difference Jacobian with step h_j = max(1e-6, 1e-6 |x_j|), the
/// same scheme the solver uses internally.
inline Eigen::MatrixXd lm_forward_jacobian(const ResidualFn& fn, const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& r0) {
    Eigen::MatrixXd jac(r0.size(), x.size());
    for (int j = 0; j < x.size(); ++j) {
        const double h = std::max(1e-6, 1e-6 * std::abs(x(j)));
        Eigen::VectorXd xp = x;
        xp(j) += h;
        jac.col(j) = (fn(xp) - r0) / h;
    }
    return jac;
}

/// Damped normal equations (J^T J + lambda diag(J^T J)) delta = -J^T r with
/// the classic Marquardt lambda schedule.
inline LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& x0,
                                    const LmOptions& opts = {}) {
    opts.validate();
    constexpr double kLambdaMax = 1e12;
    LmResult res;
    res.x = x0;
    Eigen::VectorXd r = fn(res.x);
    double norm2 = r.squaredNorm();
    double lambda = opts.lambda0;

    for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
        const Eigen::MatrixXd jac = lm_forward_jacobian(fn, res.x, r);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd damping = jtj.diagonal().cwiseMax(1e-12);

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda * damping;
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
            Eigen::VectorXd delta;
            bool solvable = ldlt.info() == Eigen::Success;
            if (solvable) {
                delta = ldlt.solve(-g);
                solvable = delta.allFinite();
            }
            if (!solvable) {
                lambda *= opts.lambda_up;
                if (lambda > kLambdaMax)
                    throw SingularNormalEquations(
                        "levenberg_marquardt: damped system singular at maximum damping");
                continue;
            }
            const Eigen::VectorXd x_new = res.x + delta;
            const Eigen::VectorXd r_new = fn(x_new);
            const double norm2_new = r_new.squaredNorm();
            const double step = delta.norm();
            if (norm2_new < norm2) {
                res.x = x_new;
                r = r_new;
                norm2 = norm2_new;
                lambda = std::max(lambda * opts.lambda_down, 1e-14);
                accepted = true;
                if (step <= opts.step_tol * (res.x.norm() + opts.step_tol)) res.converged = true;
            } else {
                if (step <= opts.step_tol * (res.x.norm() + opts.step_tol)) {
                    // no productive step exists at this scale
                    res.converged = true;
                    break;
                }
                lambda *= opts.lambda_up;
                if (lambda > kLambdaMax) break;  // stalled; give up without a step
            }
        }
        if (res.converged || !accepted) break;
    }
    res.final_norm = std::sqrt(norm2);
    return res;
}

// --- Monoplane reconstruction --------------------------------------------------

struct MonoplaneSolution {
    /// positions[frame][electrode], camera frame, mm; frame 0 is the a
    /// priori model verbatim
    std::vector<PointSet3> positions;
    DisplacementVector displacements;
    std::vector<bool> electrode_converged;
    std::vector<int> electrode_iterations;
    std::vector<double> electrode_residual_norm;
    bool excess_frames_warning = false;
    std::optional<RmsReport> rms_report;

    bool any_converged() const {
        for (bool c : electrode_converged)
            if (c) return true;
        return false;
    }
};

/// Solves each electrode's displacement chain independently. dz_init may be
/// one scalar for every pair or a per-electrode per-pair table (used when
/// the true per-step depth change is known, e.g. in consistency checks).
inline MonoplaneSolution monoplane_reconstruct(
    const AprioriModel& apriori, const Track2D& track, const ProjectionMatrix& p,
    const std::vector<std::vector<double>>& dz_init, const LmOptions& opts = {}) {
    apriori.validate();
    const int n_frames = track.frame_count();
    const int n_electrodes = track.electrode_count();
    if (n_frames < 3)
        throw TooFewFrames("monoplane_reconstruct: the displacement system needs >= 3 frames");
    if (n_electrodes != static_cast<int>(apriori.points0.size()))
        throw CountMismatch("monoplane_reconstruct: electrode count mismatch");
    if (static_cast<int>(dz_init.size()) != n_electrodes)
        throw CountMismatch("monoplane_reconstruct: dz_init electrode count mismatch");

    MonoplaneSolution sol;
    sol.excess_frames_warning = n_frames > 6;
    const int n_pairs = n_frames - 1;
    sol.displacements.per_electrode.resize(n_electrodes);

    const DisplacementVector bp = init_displacements(track, apriori, p, 0.0);
    for (int e = 0; e < n_electrodes; ++e) {
        if (static_cast<int>(dz_init[e].size()) != n_pairs)
            throw ShapeMismatch("monoplane_reconstruct: dz_init pair count mismatch");
        Eigen::VectorXd x0(3 * n_pairs);
        for (int i = 0; i < n_pairs; ++i) {
            x0(3 * i) = bp.per_electrode[e][i].x();
            x0(3 * i + 1) = bp.per_electrode[e][i].y();
            x0(3 * i + 2) = dz_init[e][i];
        }
        std::vector<Point2> track_e;
        for (int i = 0; i < n_frames; ++i) track_e.push_back(track.frames[i][e]);
        const Point3 xe0 = apriori.points0[e];
        const ResidualFn fn = [&xe0, &track_e, &p](const Eigen::VectorXd& chain) {
            return detail::electrode_residuals(xe0, track_e, p, chain);
        };
        std::vector<Point3> chain(n_pairs);
        try {
            const LmResult lm = levenberg_marquardt(fn, x0, opts);
            for (int i = 0; i < n_pairs; ++i) chain[i] = lm.x.segment<3>(3 * i);
            sol.electrode_converged.push_back(lm.converged);
            sol.electrode_iterations.push_back(lm.iterations);
            sol.electrode_residual_norm.push_back(lm.final_norm);
        } catch (const SingularNormalEquations&) {
            for (int i = 0; i < n_pairs; ++i) chain[i] = x0.segment<3>(3 * i);
            sol.electrode_converged.push_back(false);
            sol.electrode_iterations.push_back(0);
            sol.electrode_residual_norm.push_back(fn(x0).norm());
        }
        sol.displacements.per_electrode[e] = std::move(chain);
    }

    sol.positions.resize(n_frames);
    sol.positions[0] = apriori.points0;  // gauge anchor, copied verbatim
    for (int i = 1; i < n_frames; ++i) {
        sol.positions[i].resize(n_electrodes);
        for (int e = 0; e < n_electrodes; ++e)
            sol.positions[i][e] =
                sol.positions[i - 1][e] + sol.displacements.per_electrode[e][i - 1];
    }
    return sol;
}

inline MonoplaneSolution monoplane_reconstruct(const AprioriModel& apriori, const Track2D& track,
                                               const ProjectionMatrix& p, double dz_init_mm,
                                               const LmOptions& opts = {}) {
    const int n_pairs = track.frame_count() - 1;
    const std::vector<std::vector<double>> dz(apriori.points0.size(),
                                              std::vector<double>(std::max(n_pairs, 0),
                                                                  dz_init_mm));
    return monoplane_reconstruct(apriori, track, p, dz, opts);
}

// --- Diastolic frame selection --------------------------------------------------

/// Index i >= 1 minimizing the RMS difference between frame i and frame
/// i-1; ties resolve to the smallest index.
inline int select_diastolic_frame(const std::vector<GrayImage>& seq) {
    if (seq.size() < 2) throw TooFewFrames("select_diastolic_frame: need at least 2 frames");
    int best = 1;
    double best_rms = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i < seq.size(); ++i) {
        if (seq[i].width != seq[i - 1].width || seq[i].height != seq[i - 1].height ||
            seq[i].size() != seq[i - 1].size())
            throw ShapeMismatch("select_diastolic_frame: frame dimensions differ");
        double sq = 0.0;
        for (size_t k = 0; k < seq[i].size(); ++k) {
            const double d = seq[i].pixels[k] - seq[i - 1].pixels[k];
            sq += d * d;
        }
        const double rms = std::sqrt(sq / static_cast<double>(seq[i].size()));
        if (rms < best_rms) {
            best_rms = rms;
            best = static_cast<int>(i);
        }
    }
    return best;
}

}  // namespace monorecon
