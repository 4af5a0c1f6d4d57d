#include "sonoseg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sonoseg/error.hpp"
#include "sonoseg/fft.hpp"

namespace sonoseg {

void SpectralConfig::validate() const {
    require(band_lo_hz < band_hi_hz, "band must satisfy lo < hi");
    require(window_length_mm > 0.0, "window length must be positive");
    require(!hop_samples || *hop_samples >= 1, "hop must be >= 1");
    require(!attenuation_db_per_mhz_cm || *attenuation_db_per_mhz_cm >= 0.0, "attenuation must be non-negative");
}

std::vector<double> hamming(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
}

Spectrum windowed_spectrum(std::span<const double> segment, double fs, std::size_t nfft) {
    require(segment.size() >= 16, "spectral segment shorter than 16 samples");
    require(fs > 0.0, "sampling rate must be positive");
    if (nfft == 0) nfft = fft::next_pow2(segment.size());
    require(nfft >= segment.size(), "nfft shorter than segment");

    const auto w = hamming(segment.size());
    std::vector<double> windowed(segment.size());
    double energy = 0.0;
    bool silent = true;
    for (std::size_t i = 0; i < segment.size(); ++i) {
        windowed[i] = segment[i] * w[i];
        energy += w[i] * w[i];
        silent = silent && segment[i] == 0.0;
    }
    if (silent) throw Error("silent window");

    auto bins = fft::forward_real(windowed, nfft);
    Spectrum out;
    const std::size_t half = nfft / 2;
    out.freqs_hz.resize(half + 1);
    out.power_db.resize(half + 1);
    constexpr double floor_power = 1e-300;
    for (std::size_t k = 0; k <= half; ++k) {
        out.freqs_hz[k] = static_cast<double>(k) * fs / static_cast<double>(nfft);
        out.power_db[k] = 10.0 * std::log10(std::max(std::norm(bins[k]) / energy, floor_power));
    }
    return out;
}

Spectrum calibrate(const Spectrum& raw, double depth_mm, const CalibrationSet& cal, const SpectralConfig& config) {
    config.validate();
    if (!cal.covers(config.band_lo_hz, config.band_hi_hz)) throw Error("band not covered by calibration data");
    const double alpha = config.attenuation(cal);
    require(alpha >= 0.0, "attenuation must be non-negative");

    Spectrum out;
    for (std::size_t k = 0; k < raw.freqs_hz.size(); ++k) {
        const double f = raw.freqs_hz[k];
        if (f < cal.frequencies_hz.front() || f > cal.frequencies_hz.back()) continue;
        out.freqs_hz.push_back(f);
        out.power_db.push_back(raw.power_db[k]);
    }
    const auto transfer = cal.transfer_at(out.freqs_hz);
    const auto diffraction = cal.diffraction_at(depth_mm, out.freqs_hz);
    const double depth_cm = depth_mm / 10.0;
    for (std::size_t k = 0; k < out.freqs_hz.size(); ++k) {
        const double f_mhz = out.freqs_hz[k] / 1e6;
        out.power_db[k] += -transfer[k] - diffraction[k] + 2.0 * alpha * depth_cm * f_mhz;
    }
    return out;
}

namespace {

// Indices of the regression bins.
std::pair<std::size_t, std::size_t> band_bins(const Spectrum& s, const SpectralConfig& config) {
    const double slack = 1e-9 * config.band_hi_hz;
    std::size_t first = s.freqs_hz.size(), last = 0;
    for (std::size_t k = 0; k < s.freqs_hz.size(); ++k) {
        if (s.freqs_hz[k] >= config.band_lo_hz - slack && s.freqs_hz[k] <= config.band_hi_hz + slack) {
            first = std::min(first, k);
            last = std::max(last, k);
        }
    }
    if (first > last) return {0, 0};
    if (!config.auto_6db_band) return {first, last + 1};

    std::size_t peak = first;
    for (std::size_t k = first; k <= last; ++k)
        if (s.power_db[k] > s.power_db[peak]) peak = k;
    const double floor_db = s.power_db[peak] - 6.0;
    std::size_t lo = peak, hi = peak;
    while (lo > 0 && s.power_db[lo - 1] >= floor_db) --lo;
    while (hi + 1 < s.power_db.size() && s.power_db[hi + 1] >= floor_db) ++hi;
    return {lo, hi + 1};
}

}  // namespace

BandFit regress_band(const Spectrum& s, const SpectralConfig& config) {
    auto [begin, end] = band_bins(s, config);
    if (end < begin + 3) throw Error("fewer than 3 in-band bins");
    const double n = static_cast<double>(end - begin);
    double mx = 0.0, my = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
        mx += s.freqs_hz[k] / 1e6;
        my += s.power_db[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
        const double dx = s.freqs_hz[k] / 1e6 - mx;
        sxx += dx * dx;
        sxy += dx * (s.power_db[k] - my);
    }
    BandFit fit;
    fit.slope_db_per_mhz = sxy / sxx;
    fit.intercept_db = my - fit.slope_db_per_mhz * mx;
    fit.midband_db = fit.intercept_db + fit.slope_db_per_mhz * (config.f0_hz() / 1e6);
    return fit;
}

bool ParameterImage::valid(std::size_t r, std::size_t c) const { return !std::isnan(midband(r, c)); }

std::size_t window_samples_for(const SpectralConfig& config, double axial_spacing_mm) {
    return static_cast<std::size_t>(std::lround(config.window_length_mm / axial_spacing_mm));
}

ParameterImage parameter_images(const RFFrame& frame, const CalibrationSet& cal, const SpectralConfig& config) {
    frame.validate();
    config.validate();
    if (!cal.covers(config.band_lo_hz, config.band_hi_hz)) throw Error("band not covered by calibration data");

    const std::size_t win = window_samples_for(config, frame.axial_spacing_mm);
    require(win >= 16, "spectral window shorter than 16 samples");
    require(win <= frame.samples_per_line(), "frame shallower than one spectral window");
    const std::size_t hop = config.hop_samples.value_or(std::max<std::size_t>(1, win / 2));
    const std::size_t positions = (frame.samples_per_line() - win) / hop + 1;
    const std::size_t nfft = fft::next_pow2(win);

    ParameterImage img;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    img.slope = RealGrid(positions, frame.num_lines(), nan);
    img.intercept = RealGrid(positions, frame.num_lines(), nan);
    img.midband = RealGrid(positions, frame.num_lines(), nan);
    img.f0_hz = config.f0_hz();
    img.window_samples = win;
    img.hop_samples = hop;
    for (std::size_t p = 0; p < positions; ++p)
        img.depth_centers_mm.push_back((static_cast<double>(p * hop) + 0.5 * static_cast<double>(win - 1)) *
                                       frame.axial_spacing_mm);
    for (std::size_t j = 0; j < frame.num_lines(); ++j)
        img.lateral_centers_mm.push_back(static_cast<double>(j) * frame.lateral_spacing_mm);

    std::vector<double> segment(win);
    for (std::size_t j = 0; j < frame.num_lines(); ++j) {
        for (std::size_t p = 0; p < positions; ++p) {
            const std::size_t start = p * hop;
            for (std::size_t i = 0; i < win; ++i) segment[i] = frame.samples(start + i, j);
            try {
                auto raw = windowed_spectrum(segment, frame.sampling_rate_hz, nfft);
                auto fit = regress_band(calibrate(raw, img.depth_centers_mm[p], cal, config), config);
                img.slope(p, j) = fit.slope_db_per_mhz;
                img.intercept(p, j) = fit.intercept_db;
                img.midband(p, j) = fit.intercept_db + fit.slope_db_per_mhz * (img.f0_hz / 1e6);
            } catch (const Error&) {
                // silent or degenerate window: left missing
            }
        }
    }
    return img;
}

}  // namespace sonoseg
