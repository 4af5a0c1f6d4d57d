#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sonoseg/grid.hpp"

namespace sonoseg {

// One RF frame. samples(i, j): depth sample i of A-line j.
struct RFFrame {
    Grid<std::int16_t> samples;
    double sampling_rate_hz = 0.0;
    double center_frequency_hz = 0.0;
    double axial_spacing_mm = 0.0;
    double lateral_spacing_mm = 0.0;
    std::string frame_id;

    std::size_t samples_per_line() const { return samples.rows(); }
    std::size_t num_lines() const { return samples.cols(); }
    PixelSpacing spacing() const { return {axial_spacing_mm, lateral_spacing_mm}; }

    // Throws Error if the frame violates its invariants.
    void validate() const;
};

struct EnvelopeImage {
    RealGrid values;
    PixelSpacing spacing;
};

struct BModeImage {
    Grid<std::uint8_t> pixels;
    PixelSpacing spacing;
};

// System/diffraction calibration. Spectra are in dB on a strictly
// increasing frequency axis; diffraction has one row per depth.
struct CalibrationSet {
    std::vector<double> frequencies_hz;
    std::vector<double> transfer_db;
    std::vector<double> depths_mm;
    std::vector<std::vector<double>> diffraction_db;  // depth x frequency
    double attenuation_db_per_mhz_cm = 0.0;

    void validate() const;

    // Flat calibration (0 dB everywhere) over [0, max_frequency_hz].
    static CalibrationSet identity(double max_frequency_hz, double attenuation_db_per_mhz_cm = 0.0);

    // Linear interpolation onto arbitrary frequencies; diffraction is also
    // interpolated linearly in depth and clamped to the tabulated depth range.
    // Throws if any frequency falls outside the tabulated axis.
    std::vector<double> transfer_at(std::span<const double> freqs_hz) const;
    std::vector<double> diffraction_at(double depth_mm, std::span<const double> freqs_hz) const;

    bool covers(double lo_hz, double hi_hz) const;
};

// Container: a directory holding header.json + rf.bin (int16 LE, line-major).
RFFrame load_rf_frame(const std::filesystem::path& container);
void save_rf_frame(const RFFrame& frame, const std::filesystem::path& container);

// In-memory variants used by the HTTP upload path.
RFFrame parse_rf_frame(const std::string& header_json, const std::string& rf_bytes);
std::string rf_header_json(const RFFrame& frame);
std::string rf_payload(const RFFrame& frame);

CalibrationSet load_calibration(const std::filesystem::path& path);
void save_calibration(const CalibrationSet& cal, const std::filesystem::path& path);
CalibrationSet parse_calibration(const std::string& json_text);
std::string calibration_json(const CalibrationSet& cal);

// Analytic-signal magnitude of a real sequence (frequency-domain Hilbert).
std::vector<double> analytic_magnitude(std::span<const double> line);

EnvelopeImage detect_envelope(const RFFrame& frame);

inline constexpr double kDefaultDynamicRangeDb = 50.0;

BModeImage form_bmode(const EnvelopeImage& env, double dynamic_range_db = kDefaultDynamicRangeDb);

}  // namespace sonoseg
