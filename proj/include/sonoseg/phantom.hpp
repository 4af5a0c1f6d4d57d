#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sonoseg/frame_io.hpp"
#include "sonoseg/grid.hpp"

namespace sonoseg {

struct EllipseLesion {
    double center_lateral_mm = 9.6;
    double center_depth_mm = 9.85;
    double semi_axis_lateral_mm = 4.0;
    double semi_axis_depth_mm = 3.0;
    double rotation_deg = 0.0;

    // Signed distance-like coordinate: < 1 inside, 1 on the boundary.
    double radius_ratio(double lateral_mm, double depth_mm) const;
    bool contains(double lateral_mm, double depth_mm) const { return radius_ratio(lateral_mm, depth_mm) <= 1.0; }
    double width_mm() const;  // lateral extent
    double depth_mm() const;  // axial extent
};

struct PhantomSpec {
    EllipseLesion lesion;
    double background_echogenicity_db = 13.0;
    double lesion_echogenicity_db = 3.0;
    double background_heterogeneity_sd_db = 0.0;
    double lesion_heterogeneity_sd_db = 0.0;
    double border_blur_mm = 0.0;  // Gaussian sd of the level transition
    std::uint64_t speckle_seed = 1;

    std::size_t samples_per_line = 1024;
    std::size_t num_lines = 128;
    double sampling_rate_hz = 40.0e6;
    double center_frequency_hz = 10.0e6;
    double fractional_bandwidth = 0.6;  // -6 dB
    double axial_spacing_mm = 0.01925;  // c / (2 fs) at 1540 m/s
    double lateral_spacing_mm = 0.15;
    double lateral_psf_sigma_lines = 1.0;
    double texture_block_mm = 1.2;
    double amplitude_at_0db = 300.0;  // RF standard deviation at a 0 dB level
    std::string frame_id = "phantom";

    void validate() const;
    double frame_width_mm() const { return static_cast<double>(num_lines) * lateral_spacing_mm; }
    double frame_depth_mm() const { return static_cast<double>(samples_per_line) * axial_spacing_mm; }
};

struct PhantomTruth {
    Mask mask;  // pixel centres inside the ellipse
    double width_mm = 0.0;
    double depth_mm = 0.0;
    double area_mm2 = 0.0;
    std::map<std::string, double> planted;
};

struct Phantom {
    PhantomSpec spec;
    RFFrame frame;
    PhantomTruth truth;
    CalibrationSet calibration;
};

Phantom generate(const PhantomSpec& spec);

// Transfer function of the simulated system: pulse spectrum, gain and the
// mean offset of a log periodogram. No diffraction, no attenuation.
CalibrationSet phantom_calibration(const PhantomSpec& spec);

std::vector<double> phantom_pulse(const PhantomSpec& spec);

// Population statistics (benign mean/sd, malignant mean/sd) per feature.
struct ClassStats {
    double benign_mean, benign_sd, malignant_mean, malignant_sd;
};
using TableStats = std::map<std::string, ClassStats>;

const TableStats& reference_table_stats();

struct CohortMember {
    std::string frame_id;
    bool malignant = false;
    std::map<std::string, double> planted;
    PhantomSpec spec;
};

// Benign members first, then malignant. Features are drawn independently
// from Gaussians and clipped to their valid ranges.
std::vector<CohortMember> generate_cohort(std::size_t n_benign, std::size_t n_malignant, std::uint64_t seed,
                                          const TableStats& stats = reference_table_stats());

// Writes <dir>/<frame_id>/{header.json, rf.bin, truth.json, truth_mask.png}
// and <dir>/calibration.json.
void write_phantom(const Phantom& phantom, const std::filesystem::path& dir);

// Writes every member plus <dir>/labels.csv and <dir>/cohort.json.
void write_cohort(const std::vector<CohortMember>& cohort, const std::filesystem::path& dir);

}  // namespace sonoseg
