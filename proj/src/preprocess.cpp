#include "sonoseg/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "sonoseg/error.hpp"

namespace sonoseg {

int histogram_bin(double v, double lo, double hi) {
    if (hi <= lo) return 0;
    double t = (v - lo) / (hi - lo) * kHistogramBins;
    return std::clamp(static_cast<int>(std::floor(t)), 0, kHistogramBins - 1);
}

RealGrid equalize_histogram(const RealGrid& image) {
    require(!image.empty(), "empty image");
    for (double v : image) require(std::isfinite(v), "non-finite pixel");
    auto [lo_it, hi_it] = std::minmax_element(image.begin(), image.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) return image;

    std::array<double, kHistogramBins> cdf{};
    for (double v : image) cdf[static_cast<std::size_t>(histogram_bin(v, lo, hi))] += 1.0;
    const double n = static_cast<double>(image.size());
    double acc = 0.0;
    for (auto& c : cdf) {
        acc += c;
        c = acc / n;
    }
    const double base = cdf[0];  // min always lands in bin 0
    RealGrid out(image.rows(), image.cols());
    std::transform(image.begin(), image.end(), out.begin(), [&](double v) {
        double f = (cdf[static_cast<std::size_t>(histogram_bin(v, lo, hi))] - base) / (1.0 - base);
        return f >= 1.0 ? hi : f * (hi - lo) + lo;
    });
    return out;
}

void DiffusionParams::validate() const {
    require(iterations >= 1 && iterations <= 100, "diffusion iterations must be in [1, 100]");
    require(step > 0.0 && step <= 0.25, "diffusion step must be in (0, 0.25]");
    require(epsilon > 0.0, "diffusion epsilon must be positive");
}

namespace {

double conductance(double d, double p, double eps) {
    double ratio = d / (std::abs(p) + eps);
    return 1.0 / (1.0 + ratio * ratio);
}

}  // namespace

Diffusivity diffusivity_at(const RealGrid& u, std::size_t r, std::size_t c, const DiffusionParams& params) {
    std::array<double, 9> w{};
    std::array<double, 3> row_mean{}, col_mean{};
    const long rr = static_cast<long>(r), cc = static_cast<long>(c);
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            double v = u.clamped(rr + dr, cc + dc);
            w[static_cast<std::size_t>((dr + 1) * 3 + (dc + 1))] = v;
            row_mean[static_cast<std::size_t>(dr + 1)] += v / 3.0;
            col_mean[static_cast<std::size_t>(dc + 1)] += v / 3.0;
        }
    }
    const double center = w[4];
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= 9.0;

    double threshold;
    if (params.intensity_threshold) {
        threshold = *params.intensity_threshold;
    } else {
        auto sorted = w;
        std::nth_element(sorted.begin(), sorted.begin() + 4, sorted.end());
        threshold = sorted[4];
    }

    auto [cx_lo, cx_hi] = std::minmax_element(col_mean.begin(), col_mean.end());
    auto [cy_lo, cy_hi] = std::minmax_element(row_mean.begin(), row_mean.end());
    const double dx = *cx_hi - *cx_lo;
    const double dy = *cy_hi - *cy_lo;
    const bool bright = center > threshold;
    const double px = bright ? dx : center - mean;
    const double py = bright ? dy : center - mean;
    return {conductance(dx, px, params.epsilon), conductance(dy, py, params.epsilon)};
}

RealGrid diffuse(const RealGrid& image, const DiffusionParams& params) {
    params.validate();
    require(image.rows() >= 3 && image.cols() >= 3, "diffusion needs at least a 3x3 image");
    RealGrid cur = image;
    RealGrid next(image.rows(), image.cols());
    for (int it = 0; it < params.iterations; ++it) {
        for (std::size_t r = 0; r < cur.rows(); ++r) {
            const long rr = static_cast<long>(r);
            for (std::size_t c = 0; c < cur.cols(); ++c) {
                const long cc = static_cast<long>(c);
                const double s = cur(r, c);
                auto [cx, cy] = diffusivity_at(cur, r, c, params);
                double east = cur.clamped(rr, cc + 1) - s;
                double west = cur.clamped(rr, cc - 1) - s;
                double north = cur.clamped(rr - 1, cc) - s;
                double south = cur.clamped(rr + 1, cc) - s;
                next(r, c) = s + params.step * (cx * (east + west) + cy * (north + south));
            }
        }
        std::swap(cur, next);
    }
    return cur;
}

}  // namespace sonoseg
