#pragma once

// CSV/TSV file formats: electrode tracks, 3D points, reconstruction output,
// activation samples, electrograms and Table-style report rows. All float
// output is fixed 6-decimal.

#include "monorecon/mapping.hpp"
#include "monorecon/types.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace monorecon {

namespace detail {

inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) out.push_back(field);
    return out;
}

inline std::vector<std::string> read_nonempty_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << text;
    if (!out) throw IoError("short write: " + path);
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError(context + ": bad number '" + s + "'");
    }
}

inline long parse_int(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError(context + ": bad integer '" + s + "'");
    }
}

}  // namespace detail

// --- tracks.csv: frame,electrode,u_px,v_px ------------------------------------

inline std::string tracks_to_csv(const Track2D& track) {
    std::ostringstream os;
    os << "frame,electrode,u_px,v_px\n";
    for (int f = 0; f < track.frame_count(); ++f)
        for (int e = 0; e < track.electrode_count(); ++e)
            os << f << "," << e << "," << detail::fmt6(track.frames[f][e].x()) << ","
               << detail::fmt6(track.frames[f][e].y()) << "\n";
    return os.str();
}

inline void write_tracks_csv(const std::string& path, const Track2D& track) {
    detail::write_text(path, tracks_to_csv(track));
}

inline Track2D read_tracks_csv(const std::string& path) {
    const auto lines = detail::read_nonempty_lines(path);
    if (lines.empty() || lines[0] != "frame,electrode,u_px,v_px")
        throw IoError("tracks csv: bad header in " + path);
    Track2D track;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = detail::split_csv_line(lines[i], ',');
        if (f.size() != 4) throw IoError("tracks csv: bad row in " + path);
        const long frame = detail::parse_int(f[0], path);
        const long electrode = detail::parse_int(f[1], path);
        if (frame != static_cast<long>(track.frames.size()) - 1 &&
            frame != static_cast<long>(track.frames.size()))
            throw IoError("tracks csv: frames out of order in " + path);
        if (frame == static_cast<long>(track.frames.size())) track.frames.emplace_back();
        if (electrode != static_cast<long>(track.frames.back().size()))
            throw IoError("tracks csv: electrodes out of order in " + path);
        track.frames.back().emplace_back(detail::parse_double(f[2], path),
                                         detail::parse_double(f[3], path));
    }
    for (const auto& fr : track.frames)
        if (fr.size() != track.frames.front().size())
            throw IoError("tracks csv: ragged electrode counts in " + path);
    return track;
}

// --- points3d.csv: electrode,x_mm,y_mm,z_mm -----------------------------------

inline std::string points3d_to_csv(const PointSet3& pts) {
    std::ostringstream os;
    os << "electrode,x_mm,y_mm,z_mm\n";
    for (size_t e = 0; e < pts.size(); ++e)
        os << e << "," << detail::fmt6(pts[e].x()) << "," << detail::fmt6(pts[e].y()) << ","
           << detail::fmt6(pts[e].z()) << "\n";
    return os.str();
}

inline void write_points3d_csv(const std::string& path, const PointSet3& pts) {
    detail::write_text(path, points3d_to_csv(pts));
}

inline PointSet3 read_points3d_csv(const std::string& path) {
    const auto lines = detail::read_nonempty_lines(path);
    if (lines.empty() || lines[0] != "electrode,x_mm,y_mm,z_mm")
        throw IoError("points3d csv: bad header in " + path);
    PointSet3 pts;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = detail::split_csv_line(lines[i], ',');
        if (f.size() != 4) throw IoError("points3d csv: bad row in " + path);
        if (detail::parse_int(f[0], path) != static_cast<long>(pts.size()))
            throw IoError("points3d csv: electrodes out of order in " + path);
        pts.emplace_back(detail::parse_double(f[1], path), detail::parse_double(f[2], path),
                         detail::parse_double(f[3], path));
    }
    return pts;
}

// --- recon.csv: frame,electrode,x_mm,y_mm,z_mm,converged,residual_norm ---------

inline std::string recon_to_csv(const std::vector<PointSet3>& positions,
                                const std::vector<bool>& converged,
                                const std::vector<double>& residual_norm) {
    std::ostringstream os;
    os << "frame,electrode,x_mm,y_mm,z_mm,converged,residual_norm\n";
    for (size_t f = 0; f < positions.size(); ++f)
        for (size_t e = 0; e < positions[f].size(); ++e)
            os << f << "," << e << "," << detail::fmt6(positions[f][e].x()) << ","
               << detail::fmt6(positions[f][e].y()) << "," << detail::fmt6(positions[f][e].z())
               << "," << (converged[e] ? 1 : 0) << "," << detail::fmt6(residual_norm[e]) << "\n";
    return os.str();
}

// --- report rows: dz_init,n_images,view,mean,min,max,rms_accumulated -----------

struct ReportRow {
    double dz_init = 0.0;
    int n_images = 0;
    std::string view;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double rms_accumulated = 0.0;
};

inline const char* report_header() {
    return "dz_init\tn_images\tview\tmean\tmin\tmax\trms_accumulated";
}

inline std::string report_rows_to_tsv(std::vector<ReportRow> rows, bool sort_rows) {
    if (sort_rows)
        std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
            if (a.dz_init != b.dz_init) return a.dz_init < b.dz_init;
            if (a.n_images != b.n_images) return a.n_images < b.n_images;
            return a.view < b.view;
        });
    std::ostringstream os;
    os << report_header() << "\n";
    for (const auto& r : rows)
        os << detail::fmt6(r.dz_init) << "\t" << r.n_images << "\t" << r.view << "\t"
           << detail::fmt6(r.mean) << "\t" << detail::fmt6(r.min) << "\t" << detail::fmt6(r.max)
           << "\t" << detail::fmt6(r.rms_accumulated) << "\n";
    return os.str();
}

inline std::vector<ReportRow> read_report_tsv(const std::string& path) {
    const auto lines = detail::read_nonempty_lines(path);
    if (lines.empty() || lines[0] != report_header())
        throw IoError("report tsv: bad header in " + path);
    std::vector<ReportRow> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = detail::split_csv_line(lines[i], '\t');
        if (f.size() != 7) throw IoError("report tsv: bad row in " + path);
        ReportRow r;
        r.dz_init = detail::parse_double(f[0], path);
        r.n_images = static_cast<int>(detail::parse_int(f[1], path));
        r.view = f[2];
        r.mean = detail::parse_double(f[3], path);
        r.min = detail::parse_double(f[4], path);
        r.max = detail::parse_double(f[5], path);
        r.rms_accumulated = detail::parse_double(f[6], path);
        rows.push_back(r);
    }
    return rows;
}

// --- activation.csv: site,x_mm,y_mm,z_mm,lat_ms --------------------------------

inline std::string activation_to_csv(const std::vector<ActivationSample>& samples) {
    std::ostringstream os;
    os << "site,x_mm,y_mm,z_mm,lat_ms\n";
    for (const auto& s : samples)
        os << s.site_id << "," << detail::fmt6(s.position.x()) << ","
           << detail::fmt6(s.position.y()) << "," << detail::fmt6(s.position.z()) << ","
           << detail::fmt6(s.lat_ms) << "\n";
    return os.str();
}

inline void write_activation_csv(const std::string& path,
                                 const std::vector<ActivationSample>& samples) {
    detail::write_text(path, activation_to_csv(samples));
}

inline std::vector<ActivationSample> read_activation_csv(const std::string& path) {
    const auto lines = detail::read_nonempty_lines(path);
    if (lines.empty() || lines[0] != "site,x_mm,y_mm,z_mm,lat_ms")
        throw IoError("activation csv: bad header in " + path);
    std::vector<ActivationSample> samples;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = detail::split_csv_line(lines[i], ',');
        if (f.size() != 5) throw IoError("activation csv: bad row in " + path);
        ActivationSample s;
        s.site_id = static_cast<int>(detail::parse_int(f[0], path));
        s.position = Point3(detail::parse_double(f[1], path), detail::parse_double(f[2], path),
                            detail::parse_double(f[3], path));
        s.lat_ms = detail::parse_double(f[4], path);
        samples.push_back(s);
    }
    return samples;
}

// --- electrogram csv: t_s,mv ----------------------------------------------------

inline std::string electrogram_to_csv(const Electrogram& eg) {
    std::ostringstream os;
    os << "t_s,mv\n";
    for (size_t i = 0; i < eg.samples.size(); ++i)
        os << detail::fmt6(static_cast<double>(i) / eg.fs) << "," << detail::fmt6(eg.samples[i])
           << "\n";
    return os.str();
}

inline void write_electrogram_csv(const std::string& path, const Electrogram& eg) {
    detail::write_text(path, electrogram_to_csv(eg));
}

/// Reads t_s,mv and derives fs from the time column; sampling must be
/// uniform within 1e-9 s.
inline Electrogram read_electrogram_csv(const std::string& path) {
    const auto lines = detail::read_nonempty_lines(path);
    if (lines.empty() || lines[0] != "t_s,mv")
        throw IoError("electrogram csv: bad header in " + path);
    std::vector<double> t, mv;
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = detail::split_csv_line(lines[i], ',');
        if (f.size() != 2) throw IoError("electrogram csv: bad row in " + path);
        t.push_back(detail::parse_double(f[0], path));
        mv.push_back(detail::parse_double(f[1], path));
    }
    if (t.size() < 3) throw IoError("electrogram csv: need at least 3 samples in " + path);
    const double dt = t[1] - t[0];
    if (!(dt > 0.0)) throw IoError("electrogram csv: non-increasing time in " + path);
    for (size_t i = 1; i < t.size(); ++i)
        if (std::abs((t[i] - t[i - 1]) - dt) > 1e-9)
            throw IoError("electrogram csv: non-uniform sampling in " + path);
    Electrogram eg;
    eg.samples = std::move(mv);
    eg.fs = 1.0 / dt;
    eg.validate();
    return eg;
}

}  // namespace monorecon
