#pragma once

// Single-channel raster image (double pixels, nominal range [0,1]) and
// binary PGM/PPM I/O (8-bit, maxval 255).

#include "monorecon/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace monorecon {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // row-major

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    double& at(int row, int col) { return pixels[static_cast<size_t>(row) * width + col]; }
    double at(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col]; }
    size_t size() const { return pixels.size(); }

    void validate() const {
        if (width <= 0 || height <= 0 || pixels.size() != static_cast<size_t>(width) * height)
            throw ShapeMismatch("GrayImage: dimension/pixel mismatch");
        for (double v : pixels)
            if (!std::isfinite(v)) throw ShapeMismatch("GrayImage: non-finite pixel");
    }
};

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::array<std::uint8_t, 3>> pixels;  // row-major

    RgbImage() = default;
    RgbImage(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0})
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    std::array<std::uint8_t, 3>& at(int row, int col) {
        return pixels[static_cast<size_t>(row) * width + col];
    }
    const std::array<std::uint8_t, 3>& at(int row, int col) const {
        return pixels[static_cast<size_t>(row) * width + col];
    }
};

inline std::uint8_t quantize8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// --- PGM (P5) ---------------------------------------------------------------

inline std::string pgm_to_bytes(const GrayImage& img) {
    std::ostringstream os;
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    for (double v : img.pixels) os.put(static_cast<char>(quantize8(v)));
    return os.str();
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write PGM: " + path);
    const std::string bytes = pgm_to_bytes(img);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write on PGM: " + path);
}

namespace detail {

inline int pnm_next_int(std::istream& in) {
    // skip whitespace and '#' comments between header tokens
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw IoError("PNM: truncated header");
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw IoError("PNM: malformed header");
    return value;
}

}  // namespace detail

inline GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PGM: " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM (P5): " + path);
    const int w = detail::pnm_next_int(in);
    const int h = detail::pnm_next_int(in);
    const int maxval = detail::pnm_next_int(in);
    if (maxval != 255) throw IoError("PGM: only maxval 255 supported: " + path);
    GrayImage img(w, h);
    std::vector<char> raw(static_cast<size_t>(w) * h);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw IoError("PGM: truncated pixel data: " + path);
    for (size_t i = 0; i < raw.size(); ++i)
        img.pixels[i] = static_cast<std::uint8_t>(raw[i]) / 255.0;
    return img;
}

// --- PPM (P6) ---------------------------------------------------------------

inline std::string ppm_to_bytes(const RgbImage& img) {
    std::ostringstream os;
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    for (const auto& px : img.pixels)
        for (std::uint8_t ch : px) os.put(static_cast<char>(ch));
    return os.str();
}

inline void write_ppm(const std::string& path, const RgbImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write PPM: " + path);
    const std::string bytes = ppm_to_bytes(img);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write on PPM: " + path);
}

}  // namespace monorecon
