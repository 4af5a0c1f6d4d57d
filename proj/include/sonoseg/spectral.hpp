#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sonoseg/frame_io.hpp"
#include "sonoseg/grid.hpp"

namespace sonoseg {

struct Spectrum {
    std::vector<double> freqs_hz;
    std::vector<double> power_db;
};

struct SpectralConfig {
    double window_length_mm = 2.4;
    double band_lo_hz = 8.0e6;
    double band_hi_hz = 12.0e6;
    std::optional<double> center_frequency_hz;  // f0; band midpoint when unset
    std::optional<std::size_t> hop_samples;     // half a window when unset
    // Effective attenuation. Unset: the calibration set's coefficient.
    std::optional<double> attenuation_db_per_mhz_cm;
    // Regress over the contiguous region within 6 dB of the in-band peak
    // instead of the fixed band.
    bool auto_6db_band = false;

    double f0_hz() const { return center_frequency_hz.value_or(0.5 * (band_lo_hz + band_hi_hz)); }
    double attenuation(const CalibrationSet& cal) const {
        return attenuation_db_per_mhz_cm.value_or(cal.attenuation_db_per_mhz_cm);
    }
    void validate() const;
};

std::vector<double> hamming(std::size_t n);

// Hamming-windowed periodogram in dB, |Y_k|^2 / sum(w^2), bins 0..nfft/2.
// nfft = 0 selects the next power of two >= segment length.
Spectrum windowed_spectrum(std::span<const double> segment, double sampling_rate_hz, std::size_t nfft = 0);

// raw - transfer(f) - diffraction(depth, f) + 2 * alpha * d[cm] * f[MHz],
// over the bins the calibration tabulates.
Spectrum calibrate(const Spectrum& raw, double depth_mm, const CalibrationSet& cal, const SpectralConfig& config);

struct BandFit {
    double slope_db_per_mhz = 0.0;
    double intercept_db = 0.0;
    double midband_db = 0.0;
};

BandFit regress_band(const Spectrum& calibrated, const SpectralConfig& config);

// Slope / intercept / midband maps; rows are window positions along depth,
// columns are A-lines. Silent windows are NaN in every map.
struct ParameterImage {
    RealGrid slope;
    RealGrid intercept;
    RealGrid midband;
    std::vector<double> depth_centers_mm;    // per row
    std::vector<double> lateral_centers_mm;  // per column
    double f0_hz = 0.0;
    std::size_t window_samples = 0;
    std::size_t hop_samples = 0;

    std::size_t rows() const { return slope.rows(); }
    std::size_t cols() const { return slope.cols(); }
    bool valid(std::size_t r, std::size_t c) const;
};

ParameterImage parameter_images(const RFFrame& frame, const CalibrationSet& cal, const SpectralConfig& config = {});

std::size_t window_samples_for(const SpectralConfig& config, double axial_spacing_mm);

}  // namespace sonoseg
