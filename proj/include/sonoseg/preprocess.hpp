#pragma once

#include <optional>

#include "sonoseg/grid.hpp"

namespace sonoseg {

inline constexpr int kHistogramBins = 256;

// Bin index of v on kHistogramBins uniform bins spanning [lo, hi].
int histogram_bin(double v, double lo, double hi);

// Cumulative-histogram equalization over 256 uniform bins, mapped back onto
// the input's [min, max]. The accumulated histogram is offset by the mass of
// the lowest occupied bin so the extremes map onto themselves.
RealGrid equalize_histogram(const RealGrid& image);

struct DiffusionParams {
    int iterations = 15;
    double step = 0.2;
    double epsilon = 1e-6;
    // Center-pixel level above which P_a = D_a. Empty: the 3x3 window median.
    std::optional<double> intensity_threshold;

    void validate() const;
};

// Geometric nonlinear diffusion. Each iteration:
//   u += step * [C(Dx,Px) (dE + dW) + C(Dy,Py) (dN + dS)]
// with C(D,P) = 1 / (1 + (D / (|P| + eps))^2) and clamped borders.
RealGrid diffuse(const RealGrid& image, const DiffusionParams& params = {});

// Diffusivities of one pixel; exposed for testing.
struct Diffusivity {
    double cx;
    double cy;
};
Diffusivity diffusivity_at(const RealGrid& image, std::size_t r, std::size_t c, const DiffusionParams& params);

}  // namespace sonoseg
