#pragma once

// Command-line driver: simulate, segment, triangulate, monoplane, report,
// fuse, lat. Exit codes: 0 success, 2 invalid config, 3 numerical failure,
// 4 I/O failure.

#include "monorecon/camera.hpp"
#include "monorecon/config.hpp"
#include "monorecon/csvio.hpp"
#include "monorecon/filters.hpp"
#include "monorecon/image.hpp"
#include "monorecon/mapping.hpp"
#include "monorecon/reconstruct.hpp"
#include "monorecon/simulate.hpp"
#include "monorecon/types.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace monorecon::cli {

constexpr std::uint64_t kDefaultSeed = 424242;

namespace fs = std::filesystem;

// --- simulation manifest -------------------------------------------------------

struct SimulationConfig {
    std::uint64_t seed = kDefaultSeed;
    int n_frames = 6;
    double noise_mm = 0.0;
    bool render = false;
    double render_sigma = 0.05;
    double electrode_radius_px = 4.0;
    HelixSpec helix;
    RigidMotion motion;
    GantryConfig gantry_a;  // posterior-anterior
    GantryConfig gantry_b;  // left lateral
    std::string label_a = "PA";
    std::string label_b = "LAT";

    static SimulationConfig defaults() {
        SimulationConfig cfg;
        cfg.gantry_a.intrinsics = Intrinsics::square(1000.0, 512, 178.0);
        cfg.gantry_a.pose = {90.0, 0.0, 500.0};
        cfg.gantry_b.intrinsics = Intrinsics::square(1000.0, 512, 178.0);
        cfg.gantry_b.pose = {0.0, 0.0, 500.0};
        return cfg;
    }
};

namespace detail {

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline void manifest_gantry(std::map<std::string, std::string>& kv, const std::string& prefix,
                            const GantryConfig& g) {
    kv[prefix + ".focal_length_mm"] = num(g.intrinsics.f);
    kv[prefix + ".image_px"] = std::to_string(g.intrinsics.image_width);
    kv[prefix + ".intensifier_mm"] = num(g.intrinsics.intensifier_width_mm);
    kv[prefix + ".primary_deg"] = num(g.pose.primary_deg);
    kv[prefix + ".secondary_deg"] = num(g.pose.secondary_deg);
    kv[prefix + ".source_to_object_mm"] = num(g.pose.source_to_object_mm);
}

inline GantryConfig gantry_from_manifest(const KeyValueFile& kv, const std::string& prefix,
                                         const GantryConfig& fallback) {
    GantryConfig g = fallback;
    const double f = kv.get_double(prefix + ".focal_length_mm", g.intrinsics.f);
    const long px = kv.get_int(prefix + ".image_px", g.intrinsics.image_width);
    const double intensifier =
        kv.get_double(prefix + ".intensifier_mm", g.intrinsics.intensifier_width_mm);
    g.intrinsics = Intrinsics::square(f, static_cast<int>(px), intensifier);
    g.pose.primary_deg = kv.get_double(prefix + ".primary_deg", g.pose.primary_deg);
    g.pose.secondary_deg = kv.get_double(prefix + ".secondary_deg", g.pose.secondary_deg);
    g.pose.source_to_object_mm =
        kv.get_double(prefix + ".source_to_object_mm", g.pose.source_to_object_mm);
    g.pose.validate(f);
    return g;
}

}  // namespace detail

inline const std::set<std::string>& simulation_manifest_keys() {
    static const std::set<std::string> keys = {
        "seed",
        "n_frames",
        "noise_mm",
        "render",
        "render_sigma",
        "electrode_radius_px",
        "helix.n_points",
        "helix.radius_mm",
        "helix.pitch_mm",
        "helix.turns",
        "helix.center_x_mm",
        "helix.center_y_mm",
        "helix.center_z_mm",
        "helix.axis_x",
        "helix.axis_y",
        "helix.axis_z",
        "motion.theta_deg",
        "motion.phi_deg",
        "motion.psi_deg",
        "motion.tx_mm",
        "motion.ty_mm",
        "motion.tz_mm",
        "gantry_a.focal_length_mm",
        "gantry_a.image_px",
        "gantry_a.intensifier_mm",
        "gantry_a.primary_deg",
        "gantry_a.secondary_deg",
        "gantry_a.source_to_object_mm",
        "gantry_b.focal_length_mm",
        "gantry_b.image_px",
        "gantry_b.intensifier_mm",
        "gantry_b.primary_deg",
        "gantry_b.secondary_deg",
        "gantry_b.source_to_object_mm",
        "view_a.label",
        "view_b.label",
    };
    return keys;
}

inline std::string simulation_manifest_text(const SimulationConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["seed"] = std::to_string(cfg.seed);
    kv["n_frames"] = std::to_string(cfg.n_frames);
    kv["noise_mm"] = detail::num(cfg.noise_mm);
    kv["render"] = cfg.render ? "1" : "0";
    kv["render_sigma"] = detail::num(cfg.render_sigma);
    kv["electrode_radius_px"] = detail::num(cfg.electrode_radius_px);
    kv["helix.n_points"] = std::to_string(cfg.helix.n_points);
    kv["helix.radius_mm"] = detail::num(cfg.helix.radius_mm);
    kv["helix.pitch_mm"] = detail::num(cfg.helix.pitch_mm);
    kv["helix.turns"] = detail::num(cfg.helix.turns);
    kv["helix.center_x_mm"] = detail::num(cfg.helix.center_mm.x());
    kv["helix.center_y_mm"] = detail::num(cfg.helix.center_mm.y());
    kv["helix.center_z_mm"] = detail::num(cfg.helix.center_mm.z());
    kv["helix.axis_x"] = detail::num(cfg.helix.axis.x());
    kv["helix.axis_y"] = detail::num(cfg.helix.axis.y());
    kv["helix.axis_z"] = detail::num(cfg.helix.axis.z());
    kv["motion.theta_deg"] = detail::num(cfg.motion.theta_deg);
    kv["motion.phi_deg"] = detail::num(cfg.motion.phi_deg);
    kv["motion.psi_deg"] = detail::num(cfg.motion.psi_deg);
    kv["motion.tx_mm"] = detail::num(cfg.motion.t_mm.x());
    kv["motion.ty_mm"] = detail::num(cfg.motion.t_mm.y());
    kv["motion.tz_mm"] = detail::num(cfg.motion.t_mm.z());
    detail::manifest_gantry(kv, "gantry_a", cfg.gantry_a);
    detail::manifest_gantry(kv, "gantry_b", cfg.gantry_b);
    kv["view_a.label"] = cfg.label_a;
    kv["view_b.label"] = cfg.label_b;
    std::ostringstream os;
    for (const auto& [key, value] : kv) os << key << "=" << value << "\n";
    return os.str();
}

inline SimulationConfig simulation_config_from_keyvalues(const KeyValueFile& kv) {
    kv.reject_unknown_keys(simulation_manifest_keys());
    SimulationConfig cfg = SimulationConfig::defaults();
    if (kv.has("seed")) cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
    cfg.n_frames = static_cast<int>(kv.get_int("n_frames", cfg.n_frames));
    cfg.noise_mm = kv.get_double("noise_mm", cfg.noise_mm);
    cfg.render = kv.get_int("render", cfg.render ? 1 : 0) != 0;
    cfg.render_sigma = kv.get_double("render_sigma", cfg.render_sigma);
    cfg.electrode_radius_px = kv.get_double("electrode_radius_px", cfg.electrode_radius_px);
    cfg.helix.n_points = static_cast<int>(kv.get_int("helix.n_points", cfg.helix.n_points));
    cfg.helix.radius_mm = kv.get_double("helix.radius_mm", cfg.helix.radius_mm);
    cfg.helix.pitch_mm = kv.get_double("helix.pitch_mm", cfg.helix.pitch_mm);
    cfg.helix.turns = kv.get_double("helix.turns", cfg.helix.turns);
    cfg.helix.center_mm = Point3(kv.get_double("helix.center_x_mm", cfg.helix.center_mm.x()),
                                 kv.get_double("helix.center_y_mm", cfg.helix.center_mm.y()),
                                 kv.get_double("helix.center_z_mm", cfg.helix.center_mm.z()));
    Point3 axis(kv.get_double("helix.axis_x", cfg.helix.axis.x()),
                kv.get_double("helix.axis_y", cfg.helix.axis.y()),
                kv.get_double("helix.axis_z", cfg.helix.axis.z()));
    if (axis.norm() <= 0.0) throw InvalidConfig("simulate: helix axis must be nonzero");
    cfg.helix.axis = axis.normalized();
    cfg.motion.theta_deg = kv.get_double("motion.theta_deg", cfg.motion.theta_deg);
    cfg.motion.phi_deg = kv.get_double("motion.phi_deg", cfg.motion.phi_deg);
    cfg.motion.psi_deg = kv.get_double("motion.psi_deg", cfg.motion.psi_deg);
    cfg.motion.t_mm = Point3(kv.get_double("motion.tx_mm", cfg.motion.t_mm.x()),
                             kv.get_double("motion.ty_mm", cfg.motion.t_mm.y()),
                             kv.get_double("motion.tz_mm", cfg.motion.t_mm.z()));
    cfg.gantry_a = detail::gantry_from_manifest(kv, "gantry_a", cfg.gantry_a);
    cfg.gantry_b = detail::gantry_from_manifest(kv, "gantry_b", cfg.gantry_b);
    if (kv.has("view_a.label")) cfg.label_a = kv.get_string("view_a.label");
    if (kv.has("view_b.label")) cfg.label_b = kv.get_string("view_b.label");
    return cfg;
}

inline std::uint64_t render_seed(std::uint64_t base, int view, int frame) {
    return base ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(view * 100000 + frame + 1));
}

/// Writes the full sequence directory layout for one simulation run.
inline SyntheticSequence run_simulate(const SimulationConfig& cfg, const std::string& out_dir) {
    const SyntheticSequence seq = generate_sequence(cfg.helix, cfg.motion, cfg.n_frames,
                                                    cfg.gantry_a, cfg.gantry_b, cfg.noise_mm,
                                                    cfg.seed);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    fs::create_directories(out_dir + "/truth", ec);
    fs::create_directories(out_dir + "/observed", ec);
    monorecon::detail::write_text(out_dir + "/manifest.cfg", simulation_manifest_text(cfg));
    monorecon::detail::write_text(out_dir + "/gantry_a.cfg", gantry_to_text(cfg.gantry_a));
    monorecon::detail::write_text(out_dir + "/gantry_b.cfg", gantry_to_text(cfg.gantry_b));
    write_tracks_csv(out_dir + "/tracks_a.csv", seq.tracks_a);
    write_tracks_csv(out_dir + "/tracks_b.csv", seq.tracks_b);
    for (size_t i = 0; i < seq.frames.size(); ++i) {
        write_points3d_csv(out_dir + "/truth/frame_" + std::to_string(i) + ".csv",
                           seq.frames[i].truth3d);
        write_points3d_csv(out_dir + "/observed/frame_" + std::to_string(i) + ".csv",
                           seq.frames[i].observed3d);
    }
    if (cfg.render) {
        fs::create_directories(out_dir + "/frames_a", ec);
        fs::create_directories(out_dir + "/frames_b", ec);
        for (size_t i = 0; i < seq.frames.size(); ++i) {
            const int image_px = cfg.gantry_a.intrinsics.image_width;
            write_pgm(out_dir + "/frames_a/frame_" + std::to_string(i) + ".pgm",
                      render_frame(seq.tracks_a.frames[i], image_px, cfg.electrode_radius_px,
                                   cfg.render_sigma, render_seed(cfg.seed, 0, static_cast<int>(i))));
            write_pgm(out_dir + "/frames_b/frame_" + std::to_string(i) + ".pgm",
                      render_frame(seq.tracks_b.frames[i], cfg.gantry_b.intrinsics.image_width,
                                   cfg.electrode_radius_px, cfg.render_sigma,
                                   render_seed(cfg.seed, 1, static_cast<int>(i))));
        }
    }
    return seq;
}

// --- filter parameter files ------------------------------------------------------

inline const std::set<std::string>& filter_config_keys() {
    static const std::set<std::string> keys = {
        "homomorphic.gamma_L", "homomorphic.gamma_H", "homomorphic.c", "homomorphic.D0",
        "pm.K", "pm.iterations", "pm.dt",
        "shock.a", "shock.lambda_mag", "shock.lambda_phase", "shock.lambda_tilde",
        "shock.iterations", "shock.dt",
        "morph.disk_radius_px", "electrode_radius_px",
    };
    return keys;
}

inline FilterParams filter_params_from_keyvalues(const KeyValueFile& kv) {
    kv.reject_unknown_keys(filter_config_keys());
    FilterParams p;
    p.homomorphic.gamma_low = kv.get_double("homomorphic.gamma_L", p.homomorphic.gamma_low);
    p.homomorphic.gamma_high = kv.get_double("homomorphic.gamma_H", p.homomorphic.gamma_high);
    p.homomorphic.c = kv.get_double("homomorphic.c", p.homomorphic.c);
    p.homomorphic.d0_px = kv.get_double("homomorphic.D0", p.homomorphic.d0_px);
    p.perona_malik.k = kv.get_double("pm.K", p.perona_malik.k);
    p.perona_malik.iterations =
        static_cast<int>(kv.get_int("pm.iterations", p.perona_malik.iterations));
    p.perona_malik.dt = kv.get_double("pm.dt", p.perona_malik.dt);
    p.shock.a = kv.get_double("shock.a", p.shock.a);
    p.shock.lambda_mag = kv.get_double("shock.lambda_mag", p.shock.lambda_mag);
    p.shock.lambda_phase = kv.get_double("shock.lambda_phase", p.shock.lambda_phase);
    p.shock.lambda_tilde = kv.get_double("shock.lambda_tilde", p.shock.lambda_tilde);
    p.shock.iterations = static_cast<int>(kv.get_int("shock.iterations", p.shock.iterations));
    p.shock.dt = kv.get_double("shock.dt", p.shock.dt);
    p.morph.disk_radius_px =
        static_cast<int>(kv.get_int("morph.disk_radius_px", p.morph.disk_radius_px));
    p.electrode_radius_px = kv.get_double("electrode_radius_px", p.electrode_radius_px);
    p.validate();
    return p;
}

// --- command helpers ---------------------------------------------------------------

namespace detail {

inline std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        out.push_back(monorecon::detail::parse_double(item, "list"));
    }
    if (out.empty()) throw InvalidConfig("expected a comma-separated list of numbers");
    return out;
}

inline std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_double_list(text)) out.push_back(static_cast<int>(v));
    return out;
}

inline std::vector<GrayImage> load_frame_dir(const std::string& dir) {
    std::vector<GrayImage> frames;
    for (int i = 0;; ++i) {
        const std::string path = dir + "/frame_" + std::to_string(i) + ".pgm";
        if (!fs::exists(path)) break;
        frames.push_back(read_pgm(path));
    }
    if (frames.empty()) throw IoError("no frame_<i>.pgm files in " + dir);
    return frames;
}

inline Track2D track_prefix(const Track2D& track, int n_frames) {
    if (n_frames > track.frame_count())
        throw InvalidConfig("requested more frames than the track provides");
    Track2D out;
    out.frames.assign(track.frames.begin(), track.frames.begin() + n_frames);
    return out;
}

inline std::vector<PointSet3> load_truth_frames(const std::string& dir, int n_frames) {
    std::vector<PointSet3> out;
    for (int i = 0; i < n_frames; ++i)
        out.push_back(read_points3d_csv(dir + "/frame_" + std::to_string(i) + ".csv"));
    return out;
}

/// Identity-extrinsics projection for points already in the camera frame.
inline ProjectionMatrix camera_frame_projection(const Intrinsics& intr) {
    return full_projection(intr, Extrinsics{});
}

}  // namespace detail

/// Table-style per-step evaluation: each reconstructed displacement is
/// re-anchored at the reference position of the previous frame, so the row
/// measures displacement recovery rather than accumulated drift.
inline RmsReport per_step_report(const MonoplaneSolution& sol,
                                 const std::vector<PointSet3>& reference_cam) {
    const int n_frames = static_cast<int>(sol.positions.size());
    if (static_cast<int>(reference_cam.size()) < n_frames)
        throw ShapeMismatch("per_step_report: reference has fewer frames than the solution");
    std::vector<PointSet3> est, ref;
    for (int i = 1; i < n_frames; ++i) {
        PointSet3 stepped = reference_cam[i - 1];
        for (size_t e = 0; e < stepped.size(); ++e)
            stepped[e] += sol.positions[i][e] - sol.positions[i - 1][e];
        est.push_back(std::move(stepped));
        ref.push_back(reference_cam[i]);
    }
    return rms3d_report(est, ref);
}

// --- the CLI ----------------------------------------------------------------------

inline int run(std::vector<std::string> args) {
    CLI::App app{"monoplane catheter-electrode reconstruction toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = kDefaultSeed;
    std::string config_path;
    std::string out_dir = ".";
    app.add_option("--seed", seed, "RNG seed (fixed default, never time-derived)");
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--out", out_dir, "output directory");
    app.fallthrough();

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a synthetic biplane sequence");
    int sim_frames = -1;
    double sim_noise = -1.0;
    bool sim_render = false;
    int sim_points = -1;
    sim->add_option("--n-frames", sim_frames, "frames including t=0");
    sim->add_option("--noise-mm", sim_noise, "coordinate noise bound (mm)");
    sim->add_flag("--render", sim_render, "also render PGM frames");
    sim->add_option("--helix-points", sim_points, "electrode count");

    // segment
    auto* seg = app.add_subcommand("segment", "segment rendered frames into tracks");
    std::string seg_dir;
    int seg_expected = 0;
    seg->add_option("--frames-dir", seg_dir, "directory of frame_<i>.pgm")->required();
    seg->add_option("--expected-n", seg_expected, "expected electrode count")->required();

    // triangulate
    auto* tri = app.add_subcommand("triangulate", "two-view reconstruction at one frame");
    std::string tri_ga, tri_gb, tri_ta, tri_tb, tri_frame = "0", tri_view = "a", tri_frames_dir;
    tri->add_option("--gantry-a", tri_ga)->required();
    tri->add_option("--gantry-b", tri_gb)->required();
    tri->add_option("--tracks-a", tri_ta)->required();
    tri->add_option("--tracks-b", tri_tb)->required();
    tri->add_option("--frame", tri_frame, "frame index or 'diastolic'");
    tri->add_option("--frames-dir", tri_frames_dir, "PGM dir for diastolic selection");
    tri->add_option("--view", tri_view, "camera frame of the output: a or b");

    // monoplane
    auto* mono = app.add_subcommand("monoplane", "a priori single-view reconstruction");
    std::string mono_gantry, mono_tracks, mono_apriori, mono_truth, mono_label = "A";
    std::string mono_dz = "0", mono_frames = "0";
    mono->add_option("--gantry", mono_gantry)->required();
    mono->add_option("--tracks", mono_tracks)->required();
    mono->add_option("--apriori", mono_apriori, "points3d.csv in the camera frame")->required();
    mono->add_option("--dz-init", mono_dz, "comma list of initial depth steps (mm)");
    mono->add_option("--frames", mono_frames, "comma list of image counts (>= 3)");
    mono->add_option("--truth", mono_truth, "reference dir of frame_<i>.csv for reporting");
    mono->add_option("--view-label", mono_label, "view tag used in report rows");

    // report
    auto* rep = app.add_subcommand("report", "merge report rows into a sorted table");
    std::vector<std::string> rep_inputs;
    rep->add_option("inputs", rep_inputs, "report row TSV files")->required();

    // fuse
    auto* fuse = app.add_subcommand("fuse", "project the activation model onto a frame");
    std::string fuse_activation, fuse_gantry, fuse_image, fuse_palette = "bluered";
    std::string fuse_points_frame = "camera";
    fuse->add_option("--activation", fuse_activation)->required();
    fuse->add_option("--gantry", fuse_gantry)->required();
    fuse->add_option("--image", fuse_image)->required();
    fuse->add_option("--palette", fuse_palette, "bluered or grayscale");
    fuse->add_option("--points-frame", fuse_points_frame,
                     "coordinate frame of activation sites: camera or world");

    // lat
    auto* lat = app.add_subcommand("lat", "local activation time of an electrogram pair");
    std::string lat_ref, lat_map;
    lat->add_option("--ref", lat_ref)->required();
    lat->add_option("--map", lat_map)->required();

    try {
        std::vector<const char*> argv;
        argv.push_back("monorecon");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (*sim) {
            SimulationConfig cfg = config_path.empty()
                                       ? SimulationConfig::defaults()
                                       : simulation_config_from_keyvalues(
                                             KeyValueFile::load(config_path));
            if (app.get_option("--seed")->count() > 0) cfg.seed = seed;
            if (sim_frames > 0) cfg.n_frames = sim_frames;
            if (sim_noise >= 0.0) cfg.noise_mm = sim_noise;
            if (sim_render) cfg.render = true;
            if (sim_points > 0) cfg.helix.n_points = sim_points;
            run_simulate(cfg, out_dir);
            std::cout << "sequence written to " << out_dir << "\n";
        } else if (*seg) {
            const FilterParams params = config_path.empty()
                                            ? FilterParams{}
                                            : filter_params_from_keyvalues(
                                                  KeyValueFile::load(config_path));
            const auto frames = detail::load_frame_dir(seg_dir);
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            Track2D track;
            std::vector<int> manual;
            for (size_t i = 0; i < frames.size(); ++i) {
                const SegmentResult res = segment_electrodes(frames[i], params, seg_expected);
                if (res.status == SegmentStatus::Ok) {
                    track.frames.push_back(res.centroids);
                } else {
                    manual.push_back(static_cast<int>(i));
                }
            }
            {
                std::ostringstream os;
                for (int i : manual) os << i << "\n";
                monorecon::detail::write_text(out_dir + "/manual_needed.txt", os.str());
            }
            if (!track.frames.empty() && manual.empty())
                write_tracks_csv(out_dir + "/tracks.csv", track);
            const int diastolic = frames.size() > 1 ? select_diastolic_frame(frames) : 0;
            std::cout << "diastolic_frame=" << diastolic << "\n"
                      << "manual_needed=" << manual.size() << "\n";
        } else if (*tri) {
            const GantryConfig ga = load_gantry_config(tri_ga);
            const GantryConfig gb = load_gantry_config(tri_gb);
            const Track2D ta = read_tracks_csv(tri_ta);
            const Track2D tb = read_tracks_csv(tri_tb);
            if (ta.electrode_count() != tb.electrode_count())
                throw CountMismatch("triangulate: electrode counts differ between views");
            if (ta.frame_count() != tb.frame_count())
                throw CountMismatch("triangulate: frame counts differ between views");
            int frame = 0;
            if (tri_frame == "diastolic") {
                if (tri_frames_dir.empty())
                    throw InvalidConfig("triangulate: --frame diastolic needs --frames-dir");
                frame = select_diastolic_frame(detail::load_frame_dir(tri_frames_dir));
            } else {
                frame = static_cast<int>(
                    monorecon::detail::parse_int(tri_frame, "triangulate --frame"));
            }
            if (frame < 0 || frame >= ta.frame_count())
                throw InvalidConfig("triangulate: frame index out of range");
            const ProjectionMatrix pa = ga.full();
            const ProjectionMatrix pb = gb.full();
            PointSet3 world;
            for (int e = 0; e < ta.electrode_count(); ++e)
                world.push_back(
                    triangulate(pa, pb, ta.frames[frame][e], tb.frames[frame][e]).point);
            const Extrinsics extr =
                tri_view == "b" ? gb.extrinsics() : ga.extrinsics();
            if (tri_view != "a" && tri_view != "b")
                throw InvalidConfig("triangulate: --view must be a or b");
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            write_points3d_csv(out_dir + "/points3d.csv", to_camera_frame(world, extr));
            std::cout << "triangulated frame " << frame << "\n";
        } else if (*mono) {
            const GantryConfig g = load_gantry_config(mono_gantry);
            const Track2D track = read_tracks_csv(mono_tracks);
            AprioriModel apriori;
            apriori.points0 = read_points3d_csv(mono_apriori);
            apriori.validate();
            const std::vector<double> dz_list = detail::parse_double_list(mono_dz);
            std::vector<int> frame_list;
            if (mono_frames == "0") {
                for (int n = 3; n <= std::min(6, track.frame_count()); ++n)
                    frame_list.push_back(n);
                if (frame_list.empty())
                    throw InvalidConfig("monoplane: track too short for the default sweep");
            } else {
                frame_list = detail::parse_int_list(mono_frames);
            }
            for (int n : frame_list)
                if (n < 3)
                    throw InvalidConfig(
                        "monoplane: the displacement system needs at least 3 images");
            const ProjectionMatrix p = detail::camera_frame_projection(g.intrinsics);
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            std::vector<ReportRow> rows;
            bool all_failed = false;
            for (int n : frame_list) {
                const Track2D prefix = detail::track_prefix(track, n);
                std::vector<PointSet3> reference_cam;
                if (!mono_truth.empty()) {
                    for (const auto& pts : detail::load_truth_frames(mono_truth, n))
                        reference_cam.push_back(to_camera_frame(pts, g.extrinsics()));
                }
                for (double dz : dz_list) {
                    const MonoplaneSolution sol = monoplane_reconstruct(apriori, prefix, p, dz);
                    if (!sol.any_converged()) all_failed = true;
                    std::ostringstream name;
                    name << out_dir << "/recon_dz" << dz << "_n" << n << ".csv";
                    monorecon::detail::write_text(
                        name.str(), recon_to_csv(sol.positions, sol.electrode_converged,
                                                 sol.electrode_residual_norm));
                    if (!reference_cam.empty()) {
                        const RmsReport rep = per_step_report(sol, reference_cam);
                        rows.push_back({dz, n, mono_label, rep.mean, rep.min, rep.max,
                                        rep.rms_accumulated});
                    }
                }
            }
            if (!rows.empty())
                monorecon::detail::write_text(out_dir + "/report_rows.tsv",
                                              report_rows_to_tsv(rows, false));
            if (all_failed) throw SingularNormalEquations("monoplane: no electrode converged");
            std::cout << "monoplane runs: " << frame_list.size() * dz_list.size() << "\n";
        } else if (*rep) {
            std::vector<ReportRow> rows;
            for (const auto& path : rep_inputs)
                for (const auto& r : read_report_tsv(path)) rows.push_back(r);
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            monorecon::detail::write_text(out_dir + "/table.tsv", report_rows_to_tsv(rows, true));
            std::cout << "rows: " << rows.size() << "\n";
        } else if (*fuse) {
            const auto samples = read_activation_csv(fuse_activation);
            const GantryConfig g = load_gantry_config(fuse_gantry);
            const GrayImage background = read_pgm(fuse_image);
            const ActivationMap map = build_activation_map(samples);
            ProjectionMatrix p;
            if (fuse_points_frame == "camera")
                p = detail::camera_frame_projection(g.intrinsics);
            else if (fuse_points_frame == "world")
                p = g.full();
            else
                throw InvalidConfig("fuse: --points-frame must be camera or world");
            const OverlayResult overlay =
                fuse_overlay(map, p, background, palette_from_name(fuse_palette));
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            write_ppm(out_dir + "/overlay.ppm", overlay.image);
            std::cout << "out_of_frame_vertices=" << overlay.out_of_frame_vertices.size() << "\n";
        } else if (*lat) {
            const Electrogram ref = read_electrogram_csv(lat_ref);
            const Electrogram map = read_electrogram_csv(lat_map);
            std::cout << "lat_ms=" << monorecon::detail::fmt6(detect_lat(ref, map)) << "\n";
        }
    } catch (const InvalidConfig& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace monorecon::cli
