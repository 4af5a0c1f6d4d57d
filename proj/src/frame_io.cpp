#include "sonoseg/frame_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "sonoseg/error.hpp"
#include "sonoseg/fft.hpp"

namespace sonoseg {

using nlohmann::json;
namespace fs = std::filesystem;

void RFFrame::validate() const {
    require(samples.rows() > 0 && samples.cols() > 0, "empty frame");
    require(sampling_rate_hz > 2.0 * center_frequency_hz, "Nyquist violation");
    require(center_frequency_hz > 0.0, "center frequency must be positive");
    require(axial_spacing_mm > 0.0 && lateral_spacing_mm > 0.0, "spacings must be positive");
}

void CalibrationSet::validate() const {
    require(frequencies_hz.size() >= 2, "calibration needs at least two frequencies");
    for (std::size_t k = 1; k < frequencies_hz.size(); ++k)
        require(frequencies_hz[k] > frequencies_hz[k - 1], "calibration frequencies must increase strictly");
    require(transfer_db.size() == frequencies_hz.size(), "transfer_db length mismatch");
    require(!depths_mm.empty() && diffraction_db.size() == depths_mm.size(), "diffraction depth mismatch");
    for (std::size_t k = 1; k < depths_mm.size(); ++k)
        require(depths_mm[k] > depths_mm[k - 1], "calibration depths must increase strictly");
    for (const auto& row : diffraction_db)
        require(row.size() == frequencies_hz.size(), "diffraction_db row length mismatch");
    require(attenuation_db_per_mhz_cm >= 0.0, "attenuation must be non-negative");
}

CalibrationSet CalibrationSet::identity(double max_frequency_hz, double attenuation) {
    CalibrationSet cal;
    cal.frequencies_hz = {0.0, max_frequency_hz};
    cal.transfer_db = {0.0, 0.0};
    cal.depths_mm = {0.0};
    cal.diffraction_db = {{0.0, 0.0}};
    cal.attenuation_db_per_mhz_cm = attenuation;
    return cal;
}

bool CalibrationSet::covers(double lo_hz, double hi_hz) const {
    return !frequencies_hz.empty() && lo_hz >= frequencies_hz.front() && hi_hz <= frequencies_hz.back();
}

namespace {

double interp(std::span<const double> xs, std::span<const double> ys, double x) {
    if (x < xs.front() || x > xs.back()) throw Error("band not covered by calibration data");
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.end()) return ys.back();
    std::size_t k = static_cast<std::size_t>(it - xs.begin());
    if (k == 0) return ys.front();
    double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return ys[k - 1] + t * (ys[k] - ys[k - 1]);
}

}  // namespace

std::vector<double> CalibrationSet::transfer_at(std::span<const double> freqs_hz) const {
    std::vector<double> out;
    out.reserve(freqs_hz.size());
    for (double f : freqs_hz) out.push_back(interp(frequencies_hz, transfer_db, f));
    return out;
}

std::vector<double> CalibrationSet::diffraction_at(double depth_mm, std::span<const double> freqs_hz) const {
    std::size_t hi = static_cast<std::size_t>(
        std::upper_bound(depths_mm.begin(), depths_mm.end(), depth_mm) - depths_mm.begin());
    std::size_t lo = hi == 0 ? 0 : hi - 1;
    hi = std::min(hi, depths_mm.size() - 1);
    double t = 0.0;
    if (hi != lo) t = (depth_mm - depths_mm[lo]) / (depths_mm[hi] - depths_mm[lo]);
    std::vector<double> out;
    out.reserve(freqs_hz.size());
    for (double f : freqs_hz) {
        double a = interp(frequencies_hz, diffraction_db[lo], f);
        double b = interp(frequencies_hz, diffraction_db[hi], f);
        out.push_back(a + t * (b - a));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Container I/O

std::string rf_header_json(const RFFrame& frame) {
    json h;
    h["samples_per_line"] = frame.samples_per_line();
    h["num_lines"] = frame.num_lines();
    h["sampling_rate_hz"] = frame.sampling_rate_hz;
    h["center_frequency_hz"] = frame.center_frequency_hz;
    h["axial_spacing_mm"] = frame.axial_spacing_mm;
    h["lateral_spacing_mm"] = frame.lateral_spacing_mm;
    h["frame_id"] = frame.frame_id;
    return h.dump(2) + "\n";
}

std::string rf_payload(const RFFrame& frame) {
    const std::size_t rows = frame.samples.rows();
    const std::size_t cols = frame.samples.cols();
    std::string bytes(rows * cols * 2, '\0');
    std::size_t k = 0;
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < rows; ++i) {
            auto u = static_cast<std::uint16_t>(frame.samples(i, j));
            bytes[k++] = static_cast<char>(u & 0xff);
            bytes[k++] = static_cast<char>(u >> 8);
        }
    }
    return bytes;
}

RFFrame parse_rf_frame(const std::string& header_json, const std::string& rf_bytes) {
    json h;
    try {
        h = json::parse(header_json);
    } catch (const json::exception& e) {
        throw Error(std::string("malformed header: ") + e.what());
    }
    RFFrame frame;
    std::size_t rows = 0, cols = 0;
    try {
        rows = h.at("samples_per_line").get<std::size_t>();
        cols = h.at("num_lines").get<std::size_t>();
        frame.sampling_rate_hz = h.at("sampling_rate_hz").get<double>();
        frame.center_frequency_hz = h.at("center_frequency_hz").get<double>();
        frame.axial_spacing_mm = h.at("axial_spacing_mm").get<double>();
        frame.lateral_spacing_mm = h.at("lateral_spacing_mm").get<double>();
        frame.frame_id = h.at("frame_id").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(std::string("malformed header: ") + e.what());
    }
    require(rows > 0 && cols > 0, "malformed header: empty frame");
    if (rf_bytes.size() != rows * cols * 2) throw Error("sample count mismatch");

    frame.samples = Grid<std::int16_t>(rows, cols);
    std::size_t k = 0;
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < rows; ++i) {
            auto lo = static_cast<std::uint8_t>(rf_bytes[k++]);
            auto hi = static_cast<std::uint8_t>(rf_bytes[k++]);
            frame.samples(i, j) = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
        }
    }
    frame.validate();
    return frame;
}

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

RFFrame load_rf_frame(const fs::path& container) {
    require(fs::is_directory(container), "not an RF container: " + container.string());
    return parse_rf_frame(slurp(container / "header.json"), slurp(container / "rf.bin"));
}

void save_rf_frame(const RFFrame& frame, const fs::path& container) {
    frame.validate();
    fs::create_directories(container);
    spill(container / "header.json", rf_header_json(frame));
    spill(container / "rf.bin", rf_payload(frame));
}

CalibrationSet load_calibration(const fs::path& path) { return parse_calibration(slurp(path)); }

CalibrationSet parse_calibration(const std::string& json_text) {
    CalibrationSet cal;
    try {
        json j = json::parse(json_text);
        cal.frequencies_hz = j.at("frequencies_hz").get<std::vector<double>>();
        cal.transfer_db = j.at("transfer_db").get<std::vector<double>>();
        cal.depths_mm = j.at("depths_mm").get<std::vector<double>>();
        cal.diffraction_db = j.at("diffraction_db").get<std::vector<std::vector<double>>>();
        cal.attenuation_db_per_mhz_cm = j.at("attenuation_db_per_mhz_cm").get<double>();
    } catch (const json::exception& e) {
        throw Error(std::string("malformed calibration: ") + e.what());
    }
    cal.validate();
    return cal;
}

void save_calibration(const CalibrationSet& cal, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    spill(path, calibration_json(cal));
}

std::string calibration_json(const CalibrationSet& cal) {
    cal.validate();
    json j;
    j["frequencies_hz"] = cal.frequencies_hz;
    j["transfer_db"] = cal.transfer_db;
    j["depths_mm"] = cal.depths_mm;
    j["diffraction_db"] = cal.diffraction_db;
    j["attenuation_db_per_mhz_cm"] = cal.attenuation_db_per_mhz_cm;
    return j.dump(1) + "\n";
}

// ---------------------------------------------------------------------------
// Envelope and B-mode

std::vector<double> analytic_magnitude(std::span<const double> line) {
    const std::size_t n = line.size();
    if (n == 0) return {};
    auto spec = fft::forward_real(line, n);
    // One-sided spectrum: keep DC (and Nyquist for even n), double positive bins.
    const std::size_t half = n / 2;
    for (std::size_t k = 1; k < n; ++k) {
        if (k < (n + 1) / 2) spec[k] *= 2.0;
        else if (!(n % 2 == 0 && k == half)) spec[k] = 0.0;
    }
    auto analytic = fft::inverse(spec);
    std::vector<double> mag(n);
    for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(analytic[i]) / static_cast<double>(n);
    return mag;
}

EnvelopeImage detect_envelope(const RFFrame& frame) {
    frame.validate();
    EnvelopeImage env{RealGrid(frame.samples_per_line(), frame.num_lines()), frame.spacing()};
    std::vector<double> line(frame.samples_per_line());
    for (std::size_t j = 0; j < frame.num_lines(); ++j) {
        for (std::size_t i = 0; i < line.size(); ++i) line[i] = frame.samples(i, j);
        env.values.set_column(j, analytic_magnitude(line));
    }
    return env;
}

BModeImage form_bmode(const EnvelopeImage& env, double dynamic_range_db) {
    require(dynamic_range_db > 0.0, "dynamic range must be positive");
    require(!env.values.empty(), "empty image");
    const double peak = *std::max_element(env.values.begin(), env.values.end());
    require(peak > 0.0, "empty image");
    BModeImage out{Grid<std::uint8_t>(env.values.rows(), env.values.cols()), env.spacing};
    std::transform(env.values.begin(), env.values.end(), out.pixels.begin(), [&](double v) {
        if (v <= 0.0) return std::uint8_t{0};
        double db = 20.0 * std::log10(v / peak);
        double level = (db + dynamic_range_db) / dynamic_range_db * 255.0;
        level = std::clamp(std::floor(level + 0.5), 0.0, 255.0);
        return static_cast<std::uint8_t>(level);
    });
    return out;
}

}  // namespace sonoseg
