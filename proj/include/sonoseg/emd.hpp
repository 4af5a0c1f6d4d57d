#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "sonoseg/grid.hpp"

namespace sonoseg::emd {

struct EmdParams {
    int num_imfs = 4;
    int max_sift_iterations = 50;
    double sift_sd_threshold = 0.05;

    void validate() const;
};

struct Decomposition {
    std::vector<std::vector<double>> imfs;
    std::vector<double> residue;
};

struct Extrema {
    std::vector<std::size_t> maxima;
    std::vector<std::size_t> minima;
};

// Interior strict extrema. A flat run bounded by lower (higher) neighbours on
// both sides counts once, at its midpoint with ties toward the lower index.
Extrema find_extrema(std::span<const double> signal);

std::size_t count_zero_crossings(std::span<const double> signal);

// Natural cubic spline through (xs, ys), evaluated at xs_eval.
// xs must be strictly increasing with at least two knots.
std::vector<double> natural_spline(std::span<const double> xs, std::span<const double> ys,
                                   std::span<const double> xs_eval);

enum class EndExtension { none, mirror };

struct Envelopes {
    std::vector<double> upper;
    std::vector<double> lower;
};

// Spline envelopes through maxima and minima. With EndExtension::mirror the
// two extrema nearest each end are reflected across that end first.
// Returns false when either set has fewer than two knots.
bool spline_envelopes(std::span<const double> signal, const Extrema& ext, Envelopes& out,
                      EndExtension end = EndExtension::mirror);

Decomposition decompose(std::span<const double> signal, const EmdParams& params = {});

// Per-column residue after removing params.num_imfs IMFs.
RealGrid residue_image(const RealGrid& env, const EmdParams& params = {});

// One CSV per line: columns imf1..imfN, residue.
void dump_imfs(const RealGrid& env, const EmdParams& params, const std::filesystem::path& dir);

}  // namespace sonoseg::emd
