#pragma once

// Four-step enhancement pipeline (homomorphic, Perona-Malik, complex shock,
// morphological opening) plus Otsu thresholding, connected-component
// labeling and centroid extraction for electrode segmentation.

#include "monorecon/fft.hpp"
#include "monorecon/image.hpp"
#include "monorecon/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

namespace monorecon {

struct HomomorphicParams {
    double gamma_low = 0.5;   ///< low-frequency gain (< 1)
    double gamma_high = 1.5;  ///< high-frequency gain (> 1)
    double c = 1.0;           ///< slope sharpness
    double d0_px = 30.0;      ///< cutoff radius in frequency bins
};

struct PeronaMalikParams {
    double k = 0.05;  ///< flow constant on unit-range intensities
    int iterations = 15;
    double dt = 0.2;
};

struct ShockParams {
    double a = 2.0;                       ///< arctan slope
    double lambda_mag = 0.1;              ///< |lambda|, complex diffusion along gradient
    double lambda_phase = M_PI / 1000.0;  ///< arg(lambda), also the arctan scaling theta
    double lambda_tilde = 0.05;           ///< real diffusion along level sets
    int iterations = 10;
    double dt = 0.1;
};

struct MorphParams {
    int disk_radius_px = 3;
};

struct FilterParams {
    HomomorphicParams homomorphic;
    PeronaMalikParams perona_malik;
    ShockParams shock;
    MorphParams morph;
    double electrode_radius_px = 4.0;  ///< nominal blob radius, sets the region area band

    void validate() const {
        if (!(homomorphic.gamma_low < 1.0 && homomorphic.gamma_high > 1.0))
            throw InvalidConfig("filters: need gamma_low < 1 < gamma_high");
        if (!(perona_malik.dt > 0.0 && perona_malik.dt <= 0.25))
            throw InvalidConfig("filters: Perona-Malik dt must be in (0, 0.25]");
        if (!(perona_malik.k > 0.0)) throw InvalidConfig("filters: Perona-Malik K must be > 0");
        if (morph.disk_radius_px < 1) throw InvalidConfig("filters: disk radius must be >= 1");
        if (!(electrode_radius_px > 0.0))
            throw InvalidConfig("filters: electrode radius must be > 0");
    }
};

namespace detail {

/// Eq. 4 transfer function at signed frequency indices (fu, fv).
inline double homomorphic_gain(double fu, double fv, const HomomorphicParams& p) {
    const double d2 = fu * fu + fv * fv;
    return (p.gamma_high - p.gamma_low) * (1.0 - std::exp(-p.c * d2 / (p.d0_px * p.d0_px))) +
           p.gamma_low;
}

/// Signed frequency index of DFT bin i out of n (centered spectrum).
inline double signed_freq(int i, int n) { return i <= n / 2 ? i : i - n; }

}  // namespace detail

/// Log-domain frequency filter: exp(IDFT(H . DFT(ln img))). Intensities are
/// clamped to >= 1e-4 before the log.
inline GrayImage homomorphic(const GrayImage& img, const HomomorphicParams& p) {
    img.validate();
    const int w = img.width, h = img.height;
    std::vector<detail::Complex> field(img.size());
    for (size_t i = 0; i < img.size(); ++i)
        field[i] = detail::Complex(std::log(std::max(img.pixels[i], 1e-4)), 0.0);
    detail::fft2d(field, w, h, false);
    for (int r = 0; r < h; ++r) {
        const double fv = detail::signed_freq(r, h);
        for (int c = 0; c < w; ++c) {
            const double fu = detail::signed_freq(c, w);
            field[static_cast<size_t>(r) * w + c] *= detail::homomorphic_gain(fu, fv, p);
        }
    }
    detail::fft2d(field, w, h, true);
    GrayImage out(w, h);
    for (size_t i = 0; i < out.size(); ++i) out.pixels[i] = std::exp(field[i].real());
    return out;
}

/// Explicit anisotropic diffusion, 4-neighbor flux form with zero-flux
/// borders; c(g) = exp(-(g/K)^2). Flux form keeps the total intensity
/// conserved up to roundoff.
inline GrayImage perona_malik(const GrayImage& img, const PeronaMalikParams& p) {
    img.validate();
    const int w = img.width, h = img.height;
    GrayImage cur = img;
    std::vector<double> delta(img.size());
    for (int it = 0; it < p.iterations; ++it) {
        std::fill(delta.begin(), delta.end(), 0.0);
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const size_t idx = static_cast<size_t>(r) * w + c;
                if (c + 1 < w) {
                    const double g = cur.pixels[idx + 1] - cur.pixels[idx];
                    const double flux = std::exp(-(g / p.k) * (g / p.k)) * g;
                    delta[idx] += flux;
                    delta[idx + 1] -= flux;
                }
                if (r + 1 < h) {
                    const double g = cur.pixels[idx + w] - cur.pixels[idx];
                    const double flux = std::exp(-(g / p.k) * (g / p.k)) * g;
                    delta[idx] += flux;
                    delta[idx + w] -= flux;
                }
            }
        }
        for (size_t i = 0; i < cur.size(); ++i) cur.pixels[i] += p.dt * delta[i];
    }
    return cur;
}

/// Complex shock filter (Eq. 7): the arctan of the scaled imaginary part
/// gates the shock term; lambda diffuses along the gradient direction,
/// lambda_tilde along the level-set direction. Returns the real part.
inline GrayImage complex_shock(const GrayImage& img, const ShockParams& p) {
    img.validate();
    using C = std::complex<double>;
    const int w = img.width, h = img.height;
    const C lambda = p.lambda_mag * C(std::cos(p.lambda_phase), std::sin(p.lambda_phase));
    std::vector<C> cur(img.size()), next(img.size());
    for (size_t i = 0; i < img.size(); ++i) cur[i] = C(img.pixels[i], 0.0);

    auto at = [&](int r, int c) -> const C& {
        r = std::clamp(r, 0, h - 1);
        c = std::clamp(c, 0, w - 1);
        return cur[static_cast<size_t>(r) * w + c];
    };

    for (int it = 0; it < p.iterations; ++it) {
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                const C center = at(r, c);
                const double ix = 0.5 * (at(r, c + 1).real() - at(r, c - 1).real());
                const double iy = 0.5 * (at(r + 1, c).real() - at(r - 1, c).real());
                const C ixx = at(r, c + 1) - 2.0 * center + at(r, c - 1);
                const C iyy = at(r + 1, c) - 2.0 * center + at(r - 1, c);
                const C ixy = 0.25 * (at(r + 1, c + 1) - at(r + 1, c - 1) -
                                      at(r - 1, c + 1) + at(r - 1, c - 1));
                const double g2 = ix * ix + iy * iy;
                C i_eta, i_zeta;
                if (g2 < 1e-18) {
                    i_eta = ixx;
                    i_zeta = iyy;
                } else {
                    i_eta = (ix * ix * ixx + 2.0 * ix * iy * ixy + iy * iy * iyy) / g2;
                    i_zeta = (iy * iy * ixx - 2.0 * ix * iy * ixy + ix * ix * iyy) / g2;
                }
                const double shock = -(2.0 / M_PI) *
                                     std::atan(p.a * center.imag() / p.lambda_phase) *
                                     std::sqrt(g2);
                next[static_cast<size_t>(r) * w + c] =
                    center + p.dt * (C(shock, 0.0) + lambda * i_eta + p.lambda_tilde * i_zeta);
            }
        }
        cur.swap(next);
    }
    GrayImage out(w, h);
    for (size_t i = 0; i < out.size(); ++i) out.pixels[i] = cur[i].real();
    return out;
}

namespace detail {

inline std::vector<std::pair<int, int>> disk_offsets(int radius) {
    std::vector<std::pair<int, int>> off;
    for (int dr = -radius; dr <= radius; ++dr)
        for (int dc = -radius; dc <= radius; ++dc)
            if (dr * dr + dc * dc <= radius * radius) off.emplace_back(dr, dc);
    return off;
}

enum class MorphOp { Erode, Dilate };

inline GrayImage morph_apply(const GrayImage& img, const std::vector<std::pair<int, int>>& se,
                             MorphOp op) {
    GrayImage out(img.width, img.height);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            double v = op == MorphOp::Erode ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity();
            for (const auto& [dr, dc] : se) {
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || rr >= img.height || cc < 0 || cc >= img.width) continue;
                const double s = img.at(rr, cc);
                v = op == MorphOp::Erode ? std::min(v, s) : std::max(v, s);
            }
            out.at(r, c) = v;
        }
    }
    return out;
}

}  // namespace detail

/// Grayscale opening (erosion then dilation) by a discrete disk. Cuts bright
/// structures the element does not fit into; dark blobs are untouched.
inline GrayImage morph_suppress(const GrayImage& img, int disk_radius_px) {
    img.validate();
    if (disk_radius_px < 1) throw InvalidConfig("morph_suppress: radius must be >= 1");
    const auto se = detail::disk_offsets(disk_radius_px);
    return detail::morph_apply(detail::morph_apply(img, se, detail::MorphOp::Erode), se,
                               detail::MorphOp::Dilate);
}

struct OtsuResult {
    int level = 0;                    ///< 8-bit threshold
    std::vector<std::uint8_t> mask;   ///< 1 where quantized pixel <= level
};

/// Otsu's method on the 8-bit histogram; foreground (mask=1) is the dark
/// class. Ties resolve to the lowest level.
inline OtsuResult otsu_threshold(const GrayImage& img) {
    img.validate();
    std::array<long, 256> hist{};
    for (double v : img.pixels) ++hist[quantize8(v)];
    int distinct = 0;
    for (long h : hist)
        if (h > 0) ++distinct;
    if (distinct < 2) throw DegenerateHistogram("otsu: fewer than 2 distinct 8-bit levels");

    const double total = static_cast<double>(img.size());
    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += static_cast<double>(i) * hist[i];

    int best_level = 0;
    double best_var = -1.0;
    double w0 = 0.0, sum0 = 0.0;
    for (int t = 0; t < 256; ++t) {
        w0 += hist[t];
        sum0 += static_cast<double>(t) * hist[t];
        const double w1 = total - w0;
        if (w0 <= 0.0 || w1 <= 0.0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best_var) {
            best_var = between;
            best_level = t;
        }
    }
    OtsuResult res;
    res.level = best_level;
    res.mask.resize(img.size());
    for (size_t i = 0; i < img.size(); ++i)
        res.mask[i] = quantize8(img.pixels[i]) <= best_level ? 1 : 0;
    return res;
}

struct Region {
    int label = 0;
    long area_px = 0;
    Point2 centroid = Point2::Zero();  ///< (u, v) = (col, row), sub-pixel
};

struct LabeledRegions {
    int width = 0;
    int height = 0;
    std::vector<int> labels;  ///< 0 = background
    std::vector<Region> regions;
};

/// 8-connected labeling with per-region area and unweighted centroid.
inline LabeledRegions label_components(const std::vector<std::uint8_t>& mask, int width,
                                       int height) {
    if (mask.size() != static_cast<size_t>(width) * height)
        throw ShapeMismatch("label_components: mask size mismatch");
    LabeledRegions out;
    out.width = width;
    out.height = height;
    out.labels.assign(mask.size(), 0);
    int next_label = 0;
    std::vector<size_t> stack;
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const size_t idx = static_cast<size_t>(r) * width + c;
            if (!mask[idx] || out.labels[idx] != 0) continue;
            ++next_label;
            Region reg;
            reg.label = next_label;
            double su = 0.0, sv = 0.0;
            stack.assign(1, idx);
            out.labels[idx] = next_label;
            while (!stack.empty()) {
                const size_t cur = stack.back();
                stack.pop_back();
                const int cr = static_cast<int>(cur) / width;
                const int cc = static_cast<int>(cur) % width;
                ++reg.area_px;
                su += cc;
                sv += cr;
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        const int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= height || nc < 0 || nc >= width) continue;
                        const size_t nidx = static_cast<size_t>(nr) * width + nc;
                        if (mask[nidx] && out.labels[nidx] == 0) {
                            out.labels[nidx] = next_label;
                            stack.push_back(nidx);
                        }
                    }
                }
            }
            reg.centroid = Point2(su / reg.area_px, sv / reg.area_px);
            out.regions.push_back(reg);
        }
    }
    return out;
}

enum class SegmentStatus { Ok, NeedsManual };

struct SegmentResult {
    std::vector<Point2> centroids;  ///< sorted by (v, u)
    SegmentStatus status = SegmentStatus::NeedsManual;
    int threshold_level = 0;
};

/// Full segmentation chain on a fluoroscopy frame with dark electrodes:
/// homomorphic -> Perona-Malik -> complex shock -> opening, then min-max
/// normalization, Otsu (dark foreground) and labeling. Regions are kept if
/// their area lies in [pi (r-1)^2, pi (r+3)^2] for the nominal electrode
/// radius r. Status is Ok only when exactly expected_n regions survive.
inline SegmentResult segment_electrodes(const GrayImage& img, const FilterParams& params,
                                        int expected_n) {
    params.validate();
    GrayImage f = homomorphic(img, params.homomorphic);
    f = perona_malik(f, params.perona_malik);
    f = complex_shock(f, params.shock);
    f = morph_suppress(f, params.morph.disk_radius_px);

    const auto [mn_it, mx_it] = std::minmax_element(f.pixels.begin(), f.pixels.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx - mn < 1e-12) throw DegenerateHistogram("segment_electrodes: flat filtered image");
    for (double& v : f.pixels) v = (v - mn) / (mx - mn);

    const OtsuResult otsu = otsu_threshold(f);
    const LabeledRegions labeled = label_components(otsu.mask, f.width, f.height);

    const double r = params.electrode_radius_px;
    const double area_min = M_PI * (r - 1.0) * (r - 1.0);
    const double area_max = M_PI * (r + 3.0) * (r + 3.0);
    SegmentResult res;
    res.threshold_level = otsu.level;
    for (const auto& reg : labeled.regions)
        if (reg.area_px >= area_min && reg.area_px <= area_max)
            res.centroids.push_back(reg.centroid);
    std::sort(res.centroids.begin(), res.centroids.end(), [](const Point2& a, const Point2& b) {
        return a.y() != b.y() ? a.y() < b.y() : a.x() < b.x();
    });
    res.status = static_cast<int>(res.centroids.size()) == expected_n ? SegmentStatus::Ok
                                                                      : SegmentStatus::NeedsManual;
    return res;
}

}  // namespace monorecon
