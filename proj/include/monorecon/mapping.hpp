#pragma once

// Chamber model building: 3D convex hull over mapping sites, local
// activation time measurement from electrogram pairs, and fusion of the
// colored model back onto 2D frames.

#include "monorecon/camera.hpp"
#include "monorecon/image.hpp"
#include "monorecon/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <vector>

namespace monorecon {

// --- Convex hull ----------------------------------------------------------------

struct HullModel {
    std::vector<int> vertex_ids;             ///< indices into the input point set
    PointSet3 vertices;                      ///< coordinates of the hull vertices
    std::vector<std::array<int, 3>> faces;   ///< outward-oriented triangles into `vertices`
};

namespace detail {

constexpr double kHullEps = 1e-9;  // mm, coplanarity tolerance

struct HullFace {
    std::array<int, 3> v;  // indices into the input point set, outward winding
    Point3 normal;         // unit outward normal
    double offset;         // normal . x = offset on the plane
};

inline HullFace make_face(const PointSet3& pts, int a, int b, int c, const Point3& inside) {
    HullFace f;
    f.v = {a, b, c};
    Point3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    const double len = n.norm();
    if (len < 1e-30) throw DegenerateInput("convex_hull3: degenerate face");
    n /= len;
    if (n.dot(inside - pts[a]) > 0.0) {  // flip to point away from the interior
        std::swap(f.v[1], f.v[2]);
        n = -n;
    }
    f.normal = n;
    f.offset = n.dot(pts[f.v[0]]);
    return f;
}

}  // namespace detail

/// Incremental 3D convex hull. Throws DegenerateInput when the points are
/// collinear/coplanar within 1e-9 mm.
inline HullModel convex_hull3(const PointSet3& points) {
    const int n = static_cast<int>(points.size());
    if (n < 4) throw DegenerateInput("convex_hull3: need at least 4 points");

    // initial tetrahedron from extreme points
    int i0 = 0, i1 = -1;
    for (int i = 1; i < n; ++i)
        if (points[i].x() < points[i0].x()) i0 = i;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
        const double d = (points[i] - points[i0]).norm();
        if (d > best) {
            best = d;
            i1 = i;
        }
    }
    if (best < detail::kHullEps) throw DegenerateInput("convex_hull3: points coincide");
    const Point3 dir = (points[i1] - points[i0]).normalized();
    int i2 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
        const Point3 off = points[i] - points[i0];
        const double d = (off - off.dot(dir) * dir).norm();
        if (d > best) {
            best = d;
            i2 = i;
        }
    }
    if (best < detail::kHullEps) throw DegenerateInput("convex_hull3: points are collinear");
    Point3 plane_n = (points[i1] - points[i0]).cross(points[i2] - points[i0]).normalized();
    int i3 = -1;
    best = -1.0;
    for (int i = 0; i < n; ++i) {
        const double d = std::abs(plane_n.dot(points[i] - points[i0]));
        if (d > best) {
            best = d;
            i3 = i;
        }
    }
    if (best < detail::kHullEps) throw DegenerateInput("convex_hull3: points are coplanar");

    const Point3 inside = 0.25 * (points[i0] + points[i1] + points[i2] + points[i3]);
    std::vector<detail::HullFace> faces;
    faces.push_back(detail::make_face(points, i0, i1, i2, inside));
    faces.push_back(detail::make_face(points, i0, i1, i3, inside));
    faces.push_back(detail::make_face(points, i0, i2, i3, inside));
    faces.push_back(detail::make_face(points, i1, i2, i3, inside));

    for (int i = 0; i < n; ++i) {
        if (i == i0 || i == i1 || i == i2 || i == i3) continue;
        std::vector<char> visible(faces.size(), 0);
        bool any = false;
        for (size_t f = 0; f < faces.size(); ++f) {
            if (faces[f].normal.dot(points[i]) - faces[f].offset > detail::kHullEps) {
                visible[f] = 1;
                any = true;
            }
        }
        if (!any) continue;  // inside or on the surface

        // horizon: directed edges of visible faces whose twin face is hidden
        std::set<std::pair<int, int>> visible_edges;
        for (size_t f = 0; f < faces.size(); ++f)
            if (visible[f])
                for (int k = 0; k < 3; ++k)
                    visible_edges.insert({faces[f].v[k], faces[f].v[(k + 1) % 3]});
        std::vector<std::pair<int, int>> horizon;
        for (const auto& e : visible_edges)
            if (!visible_edges.count({e.second, e.first})) horizon.push_back(e);

        std::vector<detail::HullFace> kept;
        for (size_t f = 0; f < faces.size(); ++f)
            if (!visible[f]) kept.push_back(faces[f]);
        for (const auto& [a, b] : horizon)
            kept.push_back(detail::make_face(points, a, b, i, inside));
        faces = std::move(kept);
    }

    HullModel hull;
    std::map<int, int> remap;
    for (const auto& f : faces)
        for (int v : f.v)
            if (!remap.count(v)) {
                remap[v] = static_cast<int>(hull.vertex_ids.size());
                hull.vertex_ids.push_back(v);
                hull.vertices.push_back(points[v]);
            }
    for (const auto& f : faces)
        hull.faces.push_back({remap[f.v[0]], remap[f.v[1]], remap[f.v[2]]});
    return hull;
}

/// Largest signed distance of any point to the hull surface (<= 0 means all
/// points are inside or on the hull).
inline double hull_max_signed_distance(const HullModel& hull, const PointSet3& points) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
        // inside every half-space: most-positive face distance is the bound
        double max_face = -std::numeric_limits<double>::infinity();
        for (const auto& f : hull.faces) {
            const Point3& a = hull.vertices[f[0]];
            const Point3 n =
                (hull.vertices[f[1]] - a).cross(hull.vertices[f[2]] - a).normalized();
            max_face = std::max(max_face, n.dot(p - a));
        }
        worst = std::max(worst, max_face);
    }
    return worst;
}

// --- Local activation times -------------------------------------------------------

struct Electrogram {
    std::vector<double> samples;  ///< mV
    double fs = 1000.0;           ///< samples per second

    void validate() const {
        if (!(fs > 0.0)) throw InvalidConfig("Electrogram: fs must be > 0");
        if (samples.size() < 3) throw InvalidConfig("Electrogram: need at least 3 samples");
    }
};

namespace detail {

/// Index of the fastest negative deflection (central-difference dV/dt
/// minimum, earliest on ties). Throws when the minimum sits on the
/// derivative-domain boundary.
inline int fastest_negative_deflection(const Electrogram& eg) {
    eg.validate();
    const int n = static_cast<int>(eg.samples.size());
    int best = 1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= n - 2; ++i) {
        const double d = 0.5 * (eg.samples[i + 1] - eg.samples[i - 1]) * eg.fs;
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    if (best == 1 || best == n - 2)
        throw NoDeflection("detect_lat: deflection minimum at signal boundary");
    return best;
}

}  // namespace detail

/// Local activation time (ms): delay between the fastest negative
/// deflections of the mapping and reference electrograms.
inline double detect_lat(const Electrogram& ref, const Electrogram& map) {
    if (ref.fs != map.fs) throw ShapeMismatch("detect_lat: sampling rates differ");
    const int t_ref = detail::fastest_negative_deflection(ref);
    const int t_map = detail::fastest_negative_deflection(map);
    return static_cast<double>(t_map - t_ref) * 1000.0 / ref.fs;
}

// --- Activation map ---------------------------------------------------------------

struct ActivationSample {
    int site_id = 0;
    Point3 position = Point3::Zero();  ///< mm
    double lat_ms = 0.0;
};

struct ActivationMap {
    HullModel hull;
    std::vector<double> vertex_lat;                ///< one LAT per hull vertex
    std::vector<std::pair<int, int>> site_to_vertex;  ///< non-vertex site id -> hull vertex index
};

/// Hull over the site positions; each hull vertex carries its own site's
/// LAT, non-vertex sites are recorded against their nearest hull vertex.
inline ActivationMap build_activation_map(const std::vector<ActivationSample>& samples) {
    PointSet3 pts;
    pts.reserve(samples.size());
    std::set<int> ids;
    for (const auto& s : samples) {
        if (!s.position.allFinite())
            throw DegenerateInput("build_activation_map: non-finite site position");
        if (!ids.insert(s.site_id).second)
            throw DegenerateInput("build_activation_map: duplicate site id");
        pts.push_back(s.position);
    }
    ActivationMap out;
    out.hull = convex_hull3(pts);
    out.vertex_lat.resize(out.hull.vertices.size());
    std::set<int> vertex_inputs(out.hull.vertex_ids.begin(), out.hull.vertex_ids.end());
    for (size_t v = 0; v < out.hull.vertex_ids.size(); ++v)
        out.vertex_lat[v] = samples[out.hull.vertex_ids[v]].lat_ms;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (vertex_inputs.count(static_cast<int>(i))) continue;
        int nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (size_t v = 0; v < out.hull.vertices.size(); ++v) {
            const double d = (out.hull.vertices[v] - samples[i].position).norm();
            if (d < best) {
                best = d;
                nearest = static_cast<int>(v);
            }
        }
        out.site_to_vertex.emplace_back(samples[i].site_id, nearest);
    }
    return out;
}

// --- Overlay rendering ---------------------------------------------------------------

enum class Palette { BlueRed, Grayscale };

inline Palette palette_from_name(const std::string& name) {
    if (name == "bluered") return Palette::BlueRed;
    if (name == "grayscale") return Palette::Grayscale;
    throw InvalidConfig("unknown palette: " + name);
}

/// 256-step linear color map over t in [0,1]; BlueRed runs blue (earliest)
/// to red (latest).
inline std::array<std::uint8_t, 3> palette_color(Palette p, double t) {
    const double c = std::clamp(t, 0.0, 1.0);
    const auto step = static_cast<std::uint8_t>(std::lround(c * 255.0));
    switch (p) {
        case Palette::BlueRed:
            return {step, 0, static_cast<std::uint8_t>(255 - step)};
        case Palette::Grayscale:
            return {step, step, step};
    }
    return {0, 0, 0};
}

struct OverlayResult {
    RgbImage image;
    std::vector<int> out_of_frame_vertices;  ///< hull vertex indices clipped at the border
};

namespace detail {

inline void draw_line(RgbImage& img, int r0, int c0, int r1, int c1,
                      const std::array<std::uint8_t, 3>& color) {
    const int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
    const int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
    int err = (dc > dr ? dc : -dr) / 2;
    while (true) {
        if (r0 >= 0 && r0 < img.height && c0 >= 0 && c0 < img.width) img.at(r0, c0) = color;
        if (r0 == r1 && c0 == c1) break;
        const int e2 = err;
        if (e2 > -dc) {
            err -= dr;
            c0 += sc;
        }
        if (e2 < dr) {
            err += dc;
            r0 += sr;
        }
    }
}

inline void draw_disk(RgbImage& img, double u, double v, int radius,
                      const std::array<std::uint8_t, 3>& color) {
    const int r0 = static_cast<int>(std::lround(v)), c0 = static_cast<int>(std::lround(u));
    for (int dr = -radius; dr <= radius; ++dr)
        for (int dc = -radius; dc <= radius; ++dc)
            if (dr * dr + dc * dc <= radius * radius) {
                const int r = r0 + dr, c = c0 + dc;
                if (r >= 0 && r < img.height && c >= 0 && c < img.width) img.at(r, c) = color;
            }
}

}  // namespace detail

/// Rasterizes hull edges and LAT-colored vertex markers over the grayscale
/// frame and appends a palette legend strip on the right. Vertices that
/// project outside the frame are reported and clipped, never fatal.
inline OverlayResult fuse_overlay(const ActivationMap& map, const ProjectionMatrix& p,
                                  const GrayImage& background, Palette palette) {
    if (p.variant != ProjectionVariant::Full)
        throw InvalidConfig("fuse_overlay: projection must be Full variant");
    background.validate();
    constexpr int kLegendWidth = 20;
    constexpr int kMarkerRadius = 3;

    OverlayResult out;
    out.image = RgbImage(background.width + kLegendWidth, background.height);
    for (int r = 0; r < background.height; ++r)
        for (int c = 0; c < background.width; ++c) {
            const std::uint8_t g = quantize8(background.at(r, c));
            out.image.at(r, c) = {g, g, g};
        }
    // legend: latest at the top, earliest at the bottom
    for (int r = 0; r < background.height; ++r) {
        const double t = background.height > 1
                             ? 1.0 - static_cast<double>(r) / (background.height - 1)
                             : 0.5;
        const auto color = palette_color(palette, t);
        for (int c = background.width; c < out.image.width; ++c) out.image.at(r, c) = color;
    }

    std::vector<Point2> proj;
    proj.reserve(map.hull.vertices.size());
    for (size_t v = 0; v < map.hull.vertices.size(); ++v) {
        proj.push_back(project(p, map.hull.vertices[v]));
        const Point2& q = proj.back();
        if (q.x() < 0.0 || q.x() > background.width - 1 || q.y() < 0.0 ||
            q.y() > background.height - 1)
            out.out_of_frame_vertices.push_back(static_cast<int>(v));
    }

    const std::array<std::uint8_t, 3> edge_color = {230, 230, 230};
    std::set<std::pair<int, int>> edges;
    for (const auto& f : map.hull.faces)
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            edges.insert({std::min(a, b), std::max(a, b)});
        }
    for (const auto& [a, b] : edges)
        detail::draw_line(out.image, static_cast<int>(std::lround(proj[a].y())),
                          static_cast<int>(std::lround(proj[a].x())),
                          static_cast<int>(std::lround(proj[b].y())),
                          static_cast<int>(std::lround(proj[b].x())), edge_color);

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double lat : map.vertex_lat) {
        lo = std::min(lo, lat);
        hi = std::max(hi, lat);
    }
    for (size_t v = 0; v < map.hull.vertices.size(); ++v) {
        const double t = hi > lo ? (map.vertex_lat[v] - lo) / (hi - lo) : 0.5;
        detail::draw_disk(out.image, proj[v].x(), proj[v].y(), kMarkerRadius,
                          palette_color(palette, t));
    }
    return out;
}

}  // namespace monorecon
