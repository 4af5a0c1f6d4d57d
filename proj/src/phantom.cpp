#include "sonoseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include <json.hpp>

#include "sonoseg/error.hpp"
#include "sonoseg/parallel.hpp"
#include "sonoseg/png.hpp"

namespace sonoseg {

using nlohmann::json;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Mean of 10*log10 of a unit-mean exponential variable.
const double kLogPeriodogramBiasDb = -10.0 * std::numbers::egamma / std::numbers::ln10;

}  // namespace

double EllipseLesion::radius_ratio(double x, double y) const {
    const double dx = x - center_lateral_mm, dy = y - center_depth_mm;
    const double c = std::cos(rotation_deg * kDegToRad), s = std::sin(rotation_deg * kDegToRad);
    const double u = dx * c + dy * s, v = -dx * s + dy * c;
    return std::hypot(u / semi_axis_lateral_mm, v / semi_axis_depth_mm);
}

double EllipseLesion::width_mm() const {
    const double c = std::cos(rotation_deg * kDegToRad), s = std::sin(rotation_deg * kDegToRad);
    return 2.0 * std::sqrt(std::pow(semi_axis_lateral_mm * c, 2) + std::pow(semi_axis_depth_mm * s, 2));
}

double EllipseLesion::depth_mm() const {
    const double c = std::cos(rotation_deg * kDegToRad), s = std::sin(rotation_deg * kDegToRad);
    return 2.0 * std::sqrt(std::pow(semi_axis_lateral_mm * s, 2) + std::pow(semi_axis_depth_mm * c, 2));
}

void PhantomSpec::validate() const {
    require(samples_per_line >= 16 && num_lines >= 3, "phantom frame too small");
    require(sampling_rate_hz > 2.0 * center_frequency_hz && center_frequency_hz > 0.0, "Nyquist violation");
    require(axial_spacing_mm > 0.0 && lateral_spacing_mm > 0.0, "spacings must be positive");
    require(fractional_bandwidth > 0.0, "bandwidth must be positive");
    require(lesion.semi_axis_lateral_mm > 0.0 && lesion.semi_axis_depth_mm > 0.0, "semi-axes must be positive");
    require(border_blur_mm >= 0.0, "border blur must be non-negative");
    require(background_heterogeneity_sd_db >= 0.0 && lesion_heterogeneity_sd_db >= 0.0,
            "heterogeneity must be non-negative");
    require(amplitude_at_0db > 0.0 && lateral_psf_sigma_lines >= 0.0 && texture_block_mm > 0.0,
            "invalid synthesis parameters");
    constexpr double margin = 2.0;
    const double hw = lesion.width_mm() / 2.0, hd = lesion.depth_mm() / 2.0;
    require(lesion.center_lateral_mm - hw >= margin && lesion.center_lateral_mm + hw <= frame_width_mm() - margin &&
                lesion.center_depth_mm - hd >= margin && lesion.center_depth_mm + hd <= frame_depth_mm() - margin,
            "lesion must fit inside the frame with a 2 mm margin");
}

std::vector<double> phantom_pulse(const PhantomSpec& spec) {
    // Gaussian envelope whose spectrum falls 6 dB at f0 +- bandwidth/2.
    const double bandwidth = spec.fractional_bandwidth * spec.center_frequency_hz;
    const double sigma_f = bandwidth / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
    const double tau = 1.0 / (2.0 * std::numbers::pi * sigma_f);
    const long half = static_cast<long>(std::ceil(4.0 * tau * spec.sampling_rate_hz));
    std::vector<double> h;
    for (long n = -half; n <= half; ++n) {
        const double t = static_cast<double>(n) / spec.sampling_rate_hz;
        h.push_back(std::exp(-t * t / (2.0 * tau * tau)) * std::cos(2.0 * std::numbers::pi * spec.center_frequency_hz * t));
    }
    return h;
}

namespace {

double pulse_gain(const PhantomSpec& spec, const std::vector<double>& h) {
    double e = 0.0;
    for (double v : h) e += v * v;
    return spec.amplitude_at_0db / std::sqrt(e);
}

std::vector<double> lateral_kernel(double sigma) {
    if (sigma <= 0.0) return {1.0};
    const long half = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> g;
    double e = 0.0;
    for (long k = -half; k <= half; ++k) {
        g.push_back(std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma)));
        e += g.back() * g.back();
    }
    for (double& v : g) v /= std::sqrt(e);  // unit energy keeps the scatterer variance
    return g;
}

}  // namespace

CalibrationSet phantom_calibration(const PhantomSpec& spec) {
    spec.validate();
    const auto h = phantom_pulse(spec);
    const double gain = pulse_gain(spec, h);
    CalibrationSet cal;
    constexpr std::size_t points = 161;
    const double half = static_cast<long>(h.size() / 2);
    for (std::size_t k = 0; k < points; ++k) {
        const double f = spec.sampling_rate_hz / 2.0 * static_cast<double>(k) / static_cast<double>(points - 1);
        double re = 0.0, im = 0.0;
        for (std::size_t n = 0; n < h.size(); ++n) {
            const double phase = -2.0 * std::numbers::pi * f * (static_cast<double>(n) - half) / spec.sampling_rate_hz;
            re += h[n] * std::cos(phase);
            im += h[n] * std::sin(phase);
        }
        const double mag2 = gain * gain * (re * re + im * im);
        cal.frequencies_hz.push_back(f);
        cal.transfer_db.push_back(10.0 * std::log10(std::max(mag2, 1e-30)) + kLogPeriodogramBiasDb);
    }
    cal.depths_mm = {0.0, spec.frame_depth_mm()};
    cal.diffraction_db.assign(2, std::vector<double>(points, 0.0));
    cal.attenuation_db_per_mhz_cm = 0.0;
    cal.validate();
    return cal;
}

Phantom generate(const PhantomSpec& spec) {
    spec.validate();
    const std::size_t rows = spec.samples_per_line, cols = spec.num_lines;
    std::mt19937_64 rng(spec.speckle_seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Block texture in dB, one draw per block and region.
    const std::size_t brows = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(spec.texture_block_mm / spec.axial_spacing_mm)));
    const std::size_t bcols = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(spec.texture_block_mm / spec.lateral_spacing_mm)));
    const std::size_t nbr = (rows + brows - 1) / brows, nbc = (cols + bcols - 1) / bcols;
    RealGrid tex_bg(nbr, nbc), tex_lesion(nbr, nbc);
    for (double& v : tex_bg) v = normal(rng);
    for (double& v : tex_lesion) v = normal(rng);

    Phantom out;
    out.spec = spec;
    out.truth.mask = Mask(rows, cols, 0);
    RealGrid amplitude(rows, cols);
    const double blur = spec.border_blur_mm;
    for (std::size_t i = 0; i < rows; ++i) {
        const double y = static_cast<double>(i) * spec.axial_spacing_mm;
        for (std::size_t j = 0; j < cols; ++j) {
            const double x = static_cast<double>(j) * spec.lateral_spacing_mm;
            const double rho = spec.lesion.radius_ratio(x, y);
            out.truth.mask(i, j) = rho <= 1.0 ? 1 : 0;
            double w;
            if (blur > 0.0) {
                const double dist = std::hypot(x - spec.lesion.center_lateral_mm, y - spec.lesion.center_depth_mm);
                const double signed_mm = rho > 1e-12 ? dist * (1.0 - 1.0 / rho) : -1e9;
                w = 0.5 * std::erfc(signed_mm / (blur * std::numbers::sqrt2));
            } else {
                w = rho <= 1.0 ? 1.0 : 0.0;
            }
            const double bg = spec.background_echogenicity_db + spec.background_heterogeneity_sd_db * tex_bg(i / brows, j / bcols);
            const double les = spec.lesion_echogenicity_db + spec.lesion_heterogeneity_sd_db * tex_lesion(i / brows, j / bcols);
            const double level_db = bg + w * (les - bg);
            amplitude(i, j) = std::pow(10.0, level_db / 20.0);
        }
    }

    // Scatterers, then lateral beam blur, then the axial pulse.
    RealGrid scat(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) scat(i, j) = normal(rng) * amplitude(i, j);

    const auto g = lateral_kernel(spec.lateral_psf_sigma_lines);
    const long gh = static_cast<long>(g.size() / 2);
    RealGrid beam(rows, cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (long j = 0; j < static_cast<long>(cols); ++j) {
            double acc = 0.0;
            for (long k = -gh; k <= gh; ++k) {
                long jj = j + k;
                if (jj < 0) jj = -jj;
                if (jj >= static_cast<long>(cols)) jj = 2 * static_cast<long>(cols) - 2 - jj;
                acc += g[static_cast<std::size_t>(k + gh)] * scat(i, static_cast<std::size_t>(std::clamp(jj, 0L, static_cast<long>(cols) - 1)));
            }
            beam(i, static_cast<std::size_t>(j)) = acc;
        }

    const auto h = phantom_pulse(spec);
    const double gain = pulse_gain(spec, h);
    const long hh = static_cast<long>(h.size() / 2);
    out.frame.samples = Grid<std::int16_t>(rows, cols);
    for (long i = 0; i < static_cast<long>(rows); ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (long n = -hh; n <= hh; ++n) {
                const long src = i - n;
                if (src < 0 || src >= static_cast<long>(rows)) continue;
                acc += h[static_cast<std::size_t>(n + hh)] * beam(static_cast<std::size_t>(src), j);
            }
            out.frame.samples(static_cast<std::size_t>(i), j) =
                static_cast<std::int16_t>(std::clamp(std::lround(gain * acc), -32768L, 32767L));
        }

    out.frame.sampling_rate_hz = spec.sampling_rate_hz;
    out.frame.center_frequency_hz = spec.center_frequency_hz;
    out.frame.axial_spacing_mm = spec.axial_spacing_mm;
    out.frame.lateral_spacing_mm = spec.lateral_spacing_mm;
    out.frame.frame_id = spec.frame_id;
    out.frame.validate();

    // Ground truth on the pixel-centre raster.
    long rmin = static_cast<long>(rows), rmax = -1, cmin = static_cast<long>(cols), cmax = -1;
    std::size_t count = 0;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            if (out.truth.mask(i, j)) {
                ++count;
                rmin = std::min(rmin, static_cast<long>(i));
                rmax = std::max(rmax, static_cast<long>(i));
                cmin = std::min(cmin, static_cast<long>(j));
                cmax = std::max(cmax, static_cast<long>(j));
            }
    require(count > 0, "lesion smaller than one pixel");
    out.truth.width_mm = static_cast<double>(cmax - cmin + 1) * spec.lateral_spacing_mm;
    out.truth.depth_mm = static_cast<double>(rmax - rmin + 1) * spec.axial_spacing_mm;
    out.truth.area_mm2 = static_cast<double>(count) * spec.lateral_spacing_mm * spec.axial_spacing_mm;
    out.truth.planted = {
        {"echogenicity", spec.lesion_echogenicity_db},
        {"heterogeneity", spec.lesion_heterogeneity_sd_db},
        {"aspect_ratio", spec.lesion.depth_mm() / spec.lesion.width_mm()},
        {"border_blur_mm", spec.border_blur_mm},
        {"background_echogenicity", spec.background_echogenicity_db},
    };
    out.calibration = phantom_calibration(spec);
    return out;
}

const TableStats& reference_table_stats() {
    static const TableStats stats = {
        {"echogenicity", {3.1884, 8.2389, -2.8200, 9.6313}},
        {"heterogeneity", {7.3728, 2.3343, 8.9937, 2.8422}},
        {"fnpa_midband", {0.1551, 0.1910, 0.2040, 0.1803}},
        {"fnpa", {0.4879, 0.0853, 0.4621, 0.0814}},
        {"cooccurrence_contrast", {12.5541, 5.0514, 9.8357, 3.1157}},
        {"hurst_midband", {0.5347, 0.0945, 0.5160, 0.0624}},
        {"hurst", {1.0269, 0.4311, 0.8768, 0.1789}},
        {"margin_definition", {0.1546, 0.0672, 0.1470, 0.0692}},
        {"aspect_ratio", {0.6945, 0.2225, 0.9883, 0.3997}},
        {"compactness_raw", {0.7110, 0.0933, 0.7285, 0.0701}},
        {"roundness_raw", {0.5141, 0.1336, 0.5353, 0.0997}},
        {"convexity", {0.8303, 0.0325, 0.8180, 0.0346}},
        {"solidity", {0.9160, 0.0436, 0.9026, 0.0536}},
    };
    return stats;
}

namespace {

std::pair<double, double> valid_range(const std::string& feature) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (feature == "echogenicity") return {-inf, inf};
    if (feature == "hurst" || feature == "hurst_midband") return {0.0, 1.0};
    if (feature == "aspect_ratio") return {0.2, 5.0};
    if (feature == "compactness_raw") return {0.05, std::sqrt(std::numbers::pi) / 2.0};
    if (feature == "roundness_raw") return {0.01, std::numbers::pi / 4.0};
    if (feature == "convexity" || feature == "solidity") return {0.05, 1.0};
    return {0.0, inf};
}

PhantomSpec member_spec(const std::map<std::string, double>& planted, std::uint64_t seed, const std::string& id) {
    PhantomSpec spec;
    spec.frame_id = id;
    spec.speckle_seed = seed;
    constexpr double equivalent_radius_mm = 3.0;
    const double ar = planted.at("aspect_ratio");
    const double max_lat = spec.frame_width_mm() / 2.0 - 2.5, max_depth = spec.frame_depth_mm() / 2.0 - 2.5;
    spec.lesion.center_lateral_mm = spec.frame_width_mm() / 2.0;
    spec.lesion.center_depth_mm = spec.frame_depth_mm() / 2.0;
    spec.lesion.semi_axis_lateral_mm = std::min(equivalent_radius_mm / std::sqrt(ar), max_lat);
    spec.lesion.semi_axis_depth_mm = std::min(equivalent_radius_mm * std::sqrt(ar), max_depth);
    spec.lesion_echogenicity_db = planted.at("echogenicity");
    spec.background_echogenicity_db = spec.lesion_echogenicity_db + 10.0;
    spec.lesion_heterogeneity_sd_db = planted.at("heterogeneity");
    spec.border_blur_mm = 0.2;
    return spec;
}

}  // namespace

std::vector<CohortMember> generate_cohort(std::size_t n_benign, std::size_t n_malignant, std::uint64_t seed,
                                          const TableStats& stats) {
    for (const char* needed : {"aspect_ratio", "echogenicity", "heterogeneity"})
        require(stats.count(needed) != 0, std::string("cohort statistics lack ") + needed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<CohortMember> cohort;
    const std::size_t total = n_benign + n_malignant;
    for (std::size_t k = 0; k < total; ++k) {
        CohortMember m;
        m.malignant = k >= n_benign;
        char id[32];
        std::snprintf(id, sizeof id, "case_%03zu", k);
        m.frame_id = id;
        for (const auto& [feature, s] : stats) {
            const double mean = m.malignant ? s.malignant_mean : s.benign_mean;
            const double sd = m.malignant ? s.malignant_sd : s.benign_sd;
            auto [lo, hi] = valid_range(feature);
            m.planted[feature] = std::clamp(mean + sd * normal(rng), lo, hi);
        }
        m.spec = member_spec(m.planted, seed * 1000003ULL + k + 1, m.frame_id);
        cohort.push_back(std::move(m));
    }
    return cohort;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

json lesion_json(const EllipseLesion& l) {
    return {{"center_lateral_mm", l.center_lateral_mm}, {"center_depth_mm", l.center_depth_mm},
            {"semi_axis_lateral_mm", l.semi_axis_lateral_mm}, {"semi_axis_depth_mm", l.semi_axis_depth_mm},
            {"rotation_deg", l.rotation_deg}};
}

void write_member(const Phantom& p, const EllipseLesion& lesion, const std::map<std::string, double>& planted,
                  const std::filesystem::path& dir) {
    const auto frame_dir = dir / p.frame.frame_id;
    save_rf_frame(p.frame, frame_dir);
    write_mask_png(p.truth.mask, frame_dir / "truth_mask.png");
    json truth = {{"frame_id", p.frame.frame_id},
                  {"mask_png", "truth_mask.png"},
                  {"width_mm", p.truth.width_mm},
                  {"depth_mm", p.truth.depth_mm},
                  {"area_mm2", p.truth.area_mm2},
                  {"lesion", lesion_json(lesion)},
                  {"planted", planted}};
    write_text(frame_dir / "truth.json", truth.dump(2) + "\n");
}

}  // namespace

void write_phantom(const Phantom& phantom, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_calibration(phantom.calibration, dir / "calibration.json");
    write_member(phantom, phantom.spec.lesion, phantom.truth.planted, dir);
}

void write_cohort(const std::vector<CohortMember>& cohort, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    if (!cohort.empty()) save_calibration(phantom_calibration(cohort.front().spec), dir / "calibration.json");
    parallel_for(cohort.size(), [&](std::size_t k) {
        const auto& m = cohort[k];
        const Phantom p = generate(m.spec);
        auto planted = p.truth.planted;
        for (const auto& [name, v] : m.planted) planted[name] = v;
        write_member(p, m.spec.lesion, planted, dir);
    });
    std::string labels = "frame_id,label\n";
    json summary = json::array();
    for (const auto& m : cohort) {
        labels += m.frame_id + (m.malignant ? ",malignant\n" : ",benign\n");
        summary.push_back({{"frame_id", m.frame_id}, {"label", m.malignant ? "malignant" : "benign"}, {"planted", m.planted}});
    }
    write_text(dir / "labels.csv", labels);
    write_text(dir / "cohort.json", summary.dump(2) + "\n");
}

}  // namespace sonoseg
