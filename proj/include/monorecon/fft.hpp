#pragma once

// Minimal complex FFT used by the homomorphic filter: iterative radix-2 for
// power-of-two lengths, Bluestein's chirp-z fallback for everything else.

#include <cmath>
#include <complex>
#include <vector>

namespace monorecon::detail {

using Complex = std::complex<double>;

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void fft_radix2(std::vector<Complex>& a, bool inverse) {
    const size_t n = a.size();
    if (n < 2) return;
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const Complex wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            Complex w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const Complex u = a[i + j];
                const Complex v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline void fft_bluestein(std::vector<Complex>& a, bool inverse) {
    const size_t n = a.size();
    size_t m = 1;
    while (m < 2 * n + 1) m <<= 1;
    // chirp w_k = exp(+-i pi k^2 / n); indices squared mod 2n to stay exact
    std::vector<Complex> chirp(n);
    for (size_t k = 0; k < n; ++k) {
        const size_t k2 = (k * k) % (2 * n);
        const double ang = (inverse ? 1.0 : -1.0) * M_PI * static_cast<double>(k2) /
                           static_cast<double>(n);
        chirp[k] = Complex(std::cos(ang), std::sin(ang));
    }
    std::vector<Complex> fa(m, Complex(0, 0)), fb(m, Complex(0, 0));
    for (size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
    fb[0] = std::conj(chirp[0]);
    for (size_t k = 1; k < n; ++k) fb[k] = fb[m - k] = std::conj(chirp[k]);
    fft_radix2(fa, false);
    fft_radix2(fb, false);
    for (size_t k = 0; k < m; ++k) fa[k] *= fb[k];
    fft_radix2(fa, true);
    for (size_t k = 0; k < m; ++k) fa[k] /= static_cast<double>(m);
    for (size_t k = 0; k < n; ++k) a[k] = fa[k] * chirp[k];
}

/// In-place DFT; inverse applies the 1/n scale so fft(fft(x), true) == x.
inline void fft(std::vector<Complex>& a, bool inverse) {
    const size_t n = a.size();
    if (n < 2) return;
    if (is_pow2(n)) {
        fft_radix2(a, inverse);
    } else {
        fft_bluestein(a, inverse);
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

/// Row-major 2D DFT built from 1D transforms over rows then columns.
inline void fft2d(std::vector<Complex>& a, int width, int height, bool inverse) {
    std::vector<Complex> line;
    line.resize(static_cast<size_t>(width));
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) line[c] = a[static_cast<size_t>(r) * width + c];
        fft(line, inverse);
        for (int c = 0; c < width; ++c) a[static_cast<size_t>(r) * width + c] = line[c];
    }
    line.resize(static_cast<size_t>(height));
    for (int c = 0; c < width; ++c) {
        for (int r = 0; r < height; ++r) line[r] = a[static_cast<size_t>(r) * width + c];
        fft(line, inverse);
        for (int r = 0; r < height; ++r) a[static_cast<size_t>(r) * width + c] = line[r];
    }
}

}  // namespace monorecon::detail
