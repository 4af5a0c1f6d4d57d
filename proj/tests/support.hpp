#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sonoseg/grid.hpp"
#include "sonoseg/segmentation.hpp"
#include "sonoseg/spectral.hpp"

namespace testing {

using sonoseg::Grid;
using sonoseg::Mask;
using sonoseg::RealGrid;

inline Mask ellipse_mask(std::size_t rows, std::size_t cols, double cr, double cc, double ar, double ac) {
    Mask m(rows, cols, 0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            double dr = (static_cast<double>(r) - cr) / ar, dc = (static_cast<double>(c) - cc) / ac;
            if (dr * dr + dc * dc <= 1.0) m(r, c) = 1;
        }
    return m;
}

inline Mask rect_mask(std::size_t rows, std::size_t cols, std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) {
    Mask m(rows, cols, 0);
    for (std::size_t r = r0; r < r0 + h; ++r)
        for (std::size_t c = c0; c < c0 + w; ++c) m(r, c) = 1;
    return m;
}

inline RealGrid random_grid(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    RealGrid g(rows, cols, 0.0);
    for (auto& v : g.data()) v = u(rng);
    return g;
}

// Empty parameter image of rows x cols cells laid on a frame with the
// given axial pitch, window and hop (in samples) and lateral pitch.
inline sonoseg::ParameterImage blank_params(std::size_t rows, std::size_t cols, std::size_t win, std::size_t hop,
                                            double axial_mm, double lateral_mm, double f0_hz = 10e6) {
    sonoseg::ParameterImage p;
    p.slope = RealGrid(rows, cols, 0.0);
    p.intercept = RealGrid(rows, cols, 0.0);
    p.midband = RealGrid(rows, cols, 0.0);
    p.window_samples = win;
    p.hop_samples = hop;
    p.f0_hz = f0_hz;
    for (std::size_t r = 0; r < rows; ++r)
        p.depth_centers_mm.push_back((static_cast<double>(r * hop) + (static_cast<double>(win) - 1.0) / 2.0) * axial_mm);
    for (std::size_t c = 0; c < cols; ++c) p.lateral_centers_mm.push_back(static_cast<double>(c) * lateral_mm);
    return p;
}

using i128 = __int128;

// Exhaustive search over the 256 uniform bins of [min, max]: weighted
// intraclass variance n*sw^2 = Q - S0^2/n0 - S1^2/n1, compared exactly.
// Strictly smaller wins, so ties keep the lowest bin.
inline double exhaustive_otsu(const Grid<int>& img) {
    const int lo = *std::min_element(img.begin(), img.end()), hi = *std::max_element(img.begin(), img.end());
    auto bin = [&](int v) {
        long b = (static_cast<long>(v - lo) * 256) / (hi - lo);
        return static_cast<int>(std::min(b, 255L));
    };
    i128 q = 0;
    for (int v : img) q += static_cast<i128>(v) * v;
    int best = -1;
    i128 best_num = 0, best_den = 1;
    for (int k = 0; k < 255; ++k) {
        i128 n0 = 0, n1 = 0, s0 = 0, s1 = 0;
        for (int v : img) {
            if (bin(v) <= k) {
                ++n0;
                s0 += v;
            } else {
                ++n1;
                s1 += v;
            }
        }
        if (n0 == 0 || n1 == 0) continue;
        // (Q n0 n1 - S0^2 n1 - S1^2 n0) / (n0 n1)
        i128 num = q * n0 * n1 - s0 * s0 * n1 - s1 * s1 * n0;
        i128 den = n0 * n1;
        if (best < 0 || num * best_den < best_num * den) {
            best = k;
            best_num = num;
            best_den = den;
        }
    }
    int th = lo;
    for (int v : img)
        if (bin(v) <= best) th = std::max(th, v);
    return th;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("sonoseg-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
