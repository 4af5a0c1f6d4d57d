// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sonoseg/classify.hpp"
#include "sonoseg/emd.hpp"
#include "sonoseg/error.hpp"
#include "sonoseg/features.hpp"
#include "sonoseg/geometry.hpp"
#include "sonoseg/phantom.hpp"
#include "sonoseg/pipeline.hpp"
#include "sonoseg/preprocess.hpp"
#include "sonoseg/segmentation.hpp"
#include "sonoseg/spectral.hpp"
#include "../support.hpp"

using namespace sonoseg;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

double grid_min(const RealGrid& g) { return *std::min_element(g.begin(), g.end()); }
double grid_max(const RealGrid& g) { return *std::max_element(g.begin(), g.end()); }

void report(const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %-34s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome emd_reconstruction() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    double worst_rel = 0.0;
    long worst_shape = 0;
    const auto t0 = Clock::now();
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 256 + rng() % 1793;
        std::vector<double> s(n);
        double walk = 0.0, peak = 0.0;
        for (auto& v : s) {
            walk += 0.05 * g(rng);
            v = g(rng) + walk;
            peak = std::max(peak, std::abs(v));
        }
        const auto d = emd::decompose(s);
        std::vector<double> sum = d.residue;
        for (const auto& imf : d.imfs) {
            for (std::size_t i = 0; i < n; ++i) sum[i] += imf[i];
            const auto ext = emd::find_extrema(imf);
            const long ne = static_cast<long>(ext.maxima.size() + ext.minima.size());
            const long nz = static_cast<long>(emd::count_zero_crossings(imf));
            worst_shape = std::max(worst_shape, std::abs(ne - nz));
        }
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(sum[i] - s[i]));
        worst_rel = std::max(worst_rel, err / peak);
    }
    const double secs = seconds_since(t0);
    return {worst_rel <= 1e-9 && worst_shape <= 1 && secs < 5.0,
            fmt("max rel err %.2e, max |extrema - crossings| %ld, %.2f s", worst_rel, worst_shape, secs)};
}

Outcome otsu_oracle() {
    std::mt19937_64 rng(77);
    int mismatches = 0;
    double secs = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t rows = 8 + rng() % 57, cols = 8 + rng() % 57;
        Grid<int> img(rows, cols, 0);
        // mix of uniform, bimodal and narrow-range histograms
        const int kind = t % 3;
        std::uniform_int_distribution<int> u(0, 255), lo(20, 90), hi(150, 230), narrow(100, 110);
        for (auto& v : img) v = kind == 0 ? u(rng) : kind == 1 ? (rng() % 2 ? lo(rng) : hi(rng)) : narrow(rng);
        if (std::all_of(img.begin(), img.end(), [&](int v) { return v == img(0, 0); })) img(0, 0) = img(0, 0) == 0 ? 1 : 0;
        RealGrid real(rows, cols, 0.0);
        for (std::size_t i = 0; i < img.size(); ++i) real.data()[i] = img.data()[i];
        const auto t0 = Clock::now();
        const double got = otsu_threshold(real);
        secs += seconds_since(t0);
        mismatches += got != testing::exhaustive_otsu(img);
    }
    return {mismatches == 0 && secs < 10.0, fmt("%d / 1000 mismatches, %.2f s", mismatches, secs)};
}

Outcome diffusion_max_principle() {
    std::mt19937_64 rng(5);
    DiffusionParams p;
    int violations = 0, moved_constants = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t rows = 8 + rng() % 40, cols = 8 + rng() % 40;
        const auto g = testing::random_grid(rows, cols, rng, -100.0, 300.0);
        const auto out = diffuse(g, p);
        violations += grid_min(out) < grid_min(g) || grid_max(out) > grid_max(g);
        const RealGrid flat(rows, cols, static_cast<double>(t) * 1.37 - 40.0);
        moved_constants += !(diffuse(flat, p) == flat);
    }
    return {violations == 0 && moved_constants == 0 && p.iterations == 15 && p.step == 0.2,
            fmt("%d range violations, %d constant images changed (n=%d, step=%.1f)", violations, moved_constants,
                p.iterations, p.step)};
}

Outcome spectral_identities() {
    constexpr double fs_hz = 40e6;
    SpectralConfig cfg;
    cfg.attenuation_db_per_mhz_cm = 1.0;

    // midband identity on a phantom
    PhantomSpec spec;
    spec.samples_per_line = 768;
    spec.num_lines = 64;
    spec.lesion = {4.8, 7.4, 2.0, 1.6, 0.0};
    const auto ph = generate(spec);
    const auto pi = parameter_images(ph.frame, ph.calibration, cfg);
    double worst_m = 0.0;
    std::size_t cells = 0;
    for (std::size_t r = 0; r < pi.rows(); ++r)
        for (std::size_t c = 0; c < pi.cols(); ++c) {
            if (!pi.valid(r, c)) continue;
            ++cells;
            const double expect = pi.intercept(r, c) + pi.slope(r, c) * pi.f0_hz / 1e6;
            worst_m = std::max(worst_m, std::abs(pi.midband(r, c) - expect) / std::max(1.0, std::abs(expect)));
        }

    // planted line distorted by transfer, diffraction and attenuation
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-5, 5);
    CalibrationSet cal;
    cal.frequencies_hz = {0, 5e6, 10e6, 15e6, 20e6};
    cal.transfer_db = {u(rng), u(rng), u(rng), u(rng), u(rng)};
    cal.depths_mm = {0, 10, 30};
    for (int d = 0; d < 3; ++d) cal.diffraction_db.push_back({u(rng), u(rng), u(rng), u(rng), u(rng)});
    cal.attenuation_db_per_mhz_cm = 1.0;
    double worst_plant = 0.0;
    for (double depth : {2.5, 9.0, 17.3, 26.0}) {
        Spectrum plant;
        for (std::size_t k = 0; k <= 64; ++k) {
            plant.freqs_hz.push_back(static_cast<double>(k) * fs_hz / 128);
            plant.power_db.push_back(4.0 - 1.5 * plant.freqs_hz.back() / 1e6);
        }
        Spectrum distorted = plant;
        const auto tr = cal.transfer_at(plant.freqs_hz);
        const auto df = cal.diffraction_at(depth, plant.freqs_hz);
        for (std::size_t k = 0; k < plant.freqs_hz.size(); ++k)
            distorted.power_db[k] += tr[k] + df[k] - 2.0 * (depth / 10) * plant.freqs_hz[k] / 1e6;
        const auto out = calibrate(distorted, depth, cal, cfg);
        for (std::size_t k = 0; k < plant.freqs_hz.size(); ++k)
            worst_plant = std::max(worst_plant, std::abs(out.power_db[k] - plant.power_db[k]));
        const auto fit = regress_band(out, cfg);
        worst_plant = std::max({worst_plant, std::abs(fit.slope_db_per_mhz + 1.5), std::abs(fit.intercept_db - 4.0)});
    }

    // the same through parameter_images: every window a gain-scaled copy of one segment
    std::uniform_int_distribution<int> ui(-1000, 1000);
    std::vector<std::int16_t> seg(125);
    for (auto& v : seg) v = static_cast<std::int16_t>(ui(rng));
    const std::size_t positions = 6, lines = 4;
    RFFrame f;
    f.samples = Grid<std::int16_t>(125 * positions, lines, std::int16_t{0});
    f.sampling_rate_hz = fs_hz;
    f.center_frequency_hz = 10e6;
    f.axial_spacing_mm = 0.01925;
    f.lateral_spacing_mm = 0.15;
    f.frame_id = "plant";
    for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t i = 0; i < 125; ++i)
            for (std::size_t c = 0; c < lines; ++c)
                f.samples(p * 125 + i, c) = static_cast<std::int16_t>(seg[i] * static_cast<int>(p + 1 + c));
    const auto base = windowed_spectrum(std::vector<double>(seg.begin(), seg.end()), fs_hz, 128);
    const double I0 = 2.5, s0 = -0.8, cd = 0.05;
    CalibrationSet plant;
    plant.frequencies_hz = base.freqs_hz;
    for (std::size_t k = 0; k < base.freqs_hz.size(); ++k)
        plant.transfer_db.push_back(base.power_db[k] - (I0 + s0 * base.freqs_hz[k] / 1e6));
    plant.depths_mm = {0.0, 100.0};
    plant.diffraction_db.assign(2, std::vector<double>(base.freqs_hz.size(), 0.0));
    for (std::size_t k = 0; k < base.freqs_hz.size(); ++k) plant.diffraction_db[1][k] = cd * 10 * base.freqs_hz[k] / 1e6;
    plant.attenuation_db_per_mhz_cm = 1.0;
    SpectralConfig c = cfg;
    c.hop_samples = 125;
    const auto pp = parameter_images(f, plant, c);
    double worst_image = pp.rows() == positions ? 0.0 : INFINITY;
    for (std::size_t r = 0; r < pp.rows() && r < positions; ++r)
        for (std::size_t col = 0; col < lines; ++col) {
            const double d_cm = pp.depth_centers_mm[r] / 10;
            const double slope = s0 - cd * d_cm + 2.0 * d_cm;
            const double icept = I0 + 20 * std::log10(static_cast<double>(r + 1 + col));
            worst_image = std::max({worst_image, std::abs(pp.slope(r, col) - slope), std::abs(pp.intercept(r, col) - icept)});
        }

    // intercept under attenuation
    SpectralConfig none;
    none.attenuation_db_per_mhz_cm = 0.0;
    const auto flat_cal = CalibrationSet::identity(fs_hz / 2);
    double worst_shift = 0.0;
    for (double depth : {3.0, 11.0, 27.5}) {
        Spectrum line, att;
        for (std::size_t k = 0; k <= 64; ++k) {
            const double fhz = static_cast<double>(k) * fs_hz / 128;
            line.freqs_hz.push_back(fhz);
            line.power_db.push_back(6.5 - 0.3 * fhz / 1e6);
        }
        att = line;
        for (std::size_t k = 0; k < line.freqs_hz.size(); ++k) att.power_db[k] -= 2.0 * (depth / 10) * line.freqs_hz[k] / 1e6;
        const auto a = regress_band(calibrate(att, depth, flat_cal, none), none);
        const auto b = regress_band(calibrate(line, depth, flat_cal, none), none);
        worst_shift = std::max(worst_shift, std::abs(a.intercept_db - b.intercept_db));
    }

    const bool ok = cells == pi.rows() * pi.cols() && cells > 0 && worst_m <= 1e-12 && worst_plant <= 1e-9 &&
                    worst_image <= 1e-9 && worst_shift < 1e-9;
    return {ok, fmt("M-I-s*f0 %.1e on %zu cells, plant %.1e, plant via images %.1e, intercept shift %.1e", worst_m,
                    cells, worst_plant, worst_image, worst_shift)};
}

Outcome morphometric_shapes() {
    const PixelSpacing unit{1.0, 1.0};
    const double pi = std::numbers::pi;
    struct Shape {
        const char* name;
        Mask mask;
        Morphometrics expect;
    };
    std::vector<Shape> shapes;
    shapes.push_back({"circle r128", testing::ellipse_mask(270, 270, 135, 135, 128, 128), {1, 1, 0, 1, 0, 1, 1, 1}});
    {
        const double a = 128, b = 64;  // depth, lateral semi-axes
        const double h = (a - b) * (a - b) / ((a + b) * (a + b));
        const double perim = pi * (a + b) * (1 + 3 * h / (10 + std::sqrt(4 - 3 * h)));
        shapes.push_back({"ellipse 128x64",
                          testing::ellipse_mask(270, 140, 135, 70, a, b),
                          {a / b, std::sqrt(b / a), 0, b / a, 0, 1, 1, 4 * pi * pi * a * b / (perim * perim)}});
    }
    {
        const double hgt = 256, w = 128, diag = std::hypot(hgt, w);
        shapes.push_back({"rectangle 256x128",
                          testing::rect_mask(270, 140, 7, 6, 256, 128),
                          {hgt / w, std::sqrt(4 * w * hgt / pi) / diag, 0, 4 * w * hgt / (pi * diag * diag), 0, 1, 1,
                           4 * pi * w * hgt / std::pow(2 * (w + hgt), 2)}});
    }
    double worst = 0.0;
    std::string where;
    auto track = [&](const char* shape, const char* feature, double got, double want, double tol) {
        const double rel = std::abs(got - want) / want;
        if (rel / tol > worst) {
            worst = rel / tol;
            where = std::string(shape) + " " + feature;
        }
    };
    for (const auto& s : shapes) {
        const auto m = morphometrics(measure_roi(s.mask, unit));
        track(s.name, "aspect_ratio", m.aspect_ratio, s.expect.aspect_ratio, 0.02);
        track(s.name, "compactness", m.compactness, s.expect.compactness, 0.02);
        track(s.name, "roundness", m.roundness, s.expect.roundness, 0.02);
        track(s.name, "convexity", m.convexity, 1.0, 0.01);
        track(s.name, "solidity", m.solidity, 1.0, 0.01);
        track(s.name, "form_factor", m.form_factor, s.expect.form_factor, 0.02);
    }
    std::vector<geom::Point> star;
    for (int k = 0; k < 16; ++k) {
        const double a = 2 * pi * k / 16, rad = k % 2 ? 40.0 : 100.0;
        star.push_back({120 + rad * std::cos(a), 120 + rad * std::sin(a)});
    }
    Mask sm(240, 240, 0);
    for (std::size_t r = 0; r < 240; ++r)
        for (std::size_t c = 0; c < 240; ++c)
            if (geom::contains(star, {static_cast<double>(c), static_cast<double>(r)})) sm(r, c) = 1;
    const auto ms = morphometrics(measure_roi(sm, unit));
    const bool star_ok = ms.convexity < 1.0 && ms.solidity < 1.0;
    return {worst <= 1.0 && star_ok, fmt("worst error %.0f%% of tolerance (%s); star convexity %.3f solidity %.3f",
                                         100 * worst, where.c_str(), ms.convexity, ms.solidity)};
}

double concordance(const std::vector<LabeledScore>& s) {
    double conc = 0, pos = 0, neg = 0;
    for (const auto& a : s) (a.malignant ? pos : neg) += 1;
    for (const auto& a : s)
        for (const auto& b : s)
            if (a.malignant && !b.malignant) conc += a.score > b.score ? 1.0 : a.score == b.score ? 0.5 : 0.0;
    return conc / (pos * neg);
}

Outcome auc_oracle() {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 20 + rng() % 300;
        std::vector<LabeledScore> s(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i].malignant = i % 2 == 0 || rng() % 5 == 0;
            const double v = g(rng) + (s[i].malignant ? 0.8 : 0.0);
            s[i].score = t % 3 == 0 ? std::round(4 * v) / 4 : v;  // some cohorts carry ties
        }
        worst = std::max(worst, std::abs(roc(s).auc - concordance(s)));
    }
    return {worst <= 1e-12, fmt("max |AUC - concordance| %.1e over 50 cohorts", worst)};
}

// Geometry, contrast and blur are drawn up front from one generator so the
// set of phantoms is fixed before any segmentation runs.
Outcome segmentation_accuracy() {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> contrast(6.0, 12.0), blur(0.0, 0.5), lat(3.0, 5.0), dep(2.0, 3.5),
        jitter(-1.0, 1.0);
    std::vector<PhantomSpec> specs;
    for (std::uint64_t s = 0; s < 20; ++s) {
        PhantomSpec p;
        p.lesion_echogenicity_db = 3.0;
        p.background_echogenicity_db = 3.0 + contrast(rng);
        p.border_blur_mm = blur(rng);
        p.lesion.semi_axis_lateral_mm = lat(rng);
        p.lesion.semi_axis_depth_mm = dep(rng);
        p.lesion.center_lateral_mm = p.frame_width_mm() / 2 + jitter(rng);
        p.lesion.center_depth_mm = p.frame_depth_mm() / 2 + jitter(rng);
        p.speckle_seed = 1000 + s;
        p.frame_id = "seg_" + std::to_string(s);
        specs.push_back(p);
    }
    PipelineConfig config;
    double total = 0.0, worst = 0.0;
    int missed = 0;
    const auto t0 = Clock::now();
    for (const auto& spec : specs) {
        const auto ph = generate(spec);
        const auto prepared = prepare_frame(ph.frame, config);
        const auto seg = segment_frame(prepared, config.segmentation);
        double err = 100.0;
        try {
            const auto& roi = select_roi(seg.rois, RoiAtPoint{spec.lesion.center_lateral_mm, spec.lesion.center_depth_mm});
            err = dimension_error(roi, ph.truth.width_mm).percent;
        } catch (const Error&) {
            ++missed;
        }
        total += err;
        worst = std::max(worst, err);
    }
    const double secs = seconds_since(t0);
    const double mean = total / static_cast<double>(specs.size());
    return {mean <= 5.0 && secs < 120.0,
            fmt("mean |width error| %.2f%%, worst %.2f%%, %d lesions missed, %.1f s", mean, worst, missed, secs)};
}

// Independent scoring: published weights and orientations with the class
// statistics typed in, pooled the way the profiles describe.
double oracle_auc(const std::vector<CohortMember>& cohort, const std::vector<std::pair<std::string, double>>& weights) {
    const std::map<std::string, std::array<double, 4>> table = {
        {"echogenicity", {3.1884, 8.2389, -2.8200, 9.6313}},      {"heterogeneity", {7.3728, 2.3343, 8.9937, 2.8422}},
        {"margin_definition", {0.1546, 0.0672, 0.1470, 0.0692}}, {"aspect_ratio", {0.6945, 0.2225, 0.9883, 0.3997}},
        {"convexity", {0.8303, 0.0325, 0.8180, 0.0346}},
    };
    std::vector<LabeledScore> s;
    for (const auto& m : cohort) {
        double z = 0.0;
        for (const auto& [f, w] : weights) {
            const auto& t = table.at(f);
            const double mean = (t[0] + t[2]) / 2, sd = std::sqrt((t[1] * t[1] + t[3] * t[3]) / 2);
            const double sign = t[2] > t[0] ? 1.0 : -1.0;
            z += w * sign * (m.planted.at(f) - mean) / sd;
        }
        s.push_back({z, m.malignant});
    }
    return concordance(s);
}

Outcome characterization() {
    const auto cohort = generate_cohort(50, 50, 7);
    std::map<std::string, double> auc;
    for (const auto& name : {"spectral", "morphometric", "combined"}) {
        const auto profile = builtin_profile(name);
        std::vector<LabeledScore> s;
        for (const auto& m : cohort) s.push_back({score(m.planted, profile), m.malignant});
        auc[name] = roc(s).auc;
    }
    const double oracle = oracle_auc(cohort, {{"echogenicity", 0.14},
                                              {"heterogeneity", 0.14},
                                              {"margin_definition", 0.07},
                                              {"aspect_ratio", 0.36},
                                              {"convexity", 0.29}});
    const double diff = std::abs(auc["combined"] - oracle);
    const bool ordering = auc["combined"] >= std::max(auc["spectral"], auc["morphometric"]) - 0.02;
    return {diff <= 1e-12 && ordering, fmt("combined %.4f (oracle diff %.1e), spectral %.4f, morphometric %.4f",
                                           auc["combined"], diff, auc["spectral"], auc["morphometric"])};
}

Outcome margin_ordering() {
    int sharper = 0, scored = 0;
    SpectralConfig cfg;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        double md[2];
        for (int twin = 0; twin < 2; ++twin) {
            PhantomSpec spec;
            spec.speckle_seed = seed;
            spec.border_blur_mm = twin == 0 ? 0.0 : 1.5;
            const auto ph = generate(spec);
            const auto roi = measure_roi(ph.truth.mask, ph.frame.spacing());
            md[twin] = margin_definition(parameter_images(ph.frame, ph.calibration, cfg), roi);
        }
        ++scored;
        sharper += md[0] > md[1];
    }
    return {sharper >= 90, fmt("sharp > blurred in %d / %d pairs", sharper, scored)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int sh(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_determinism() {
    const std::string cli = std::string("'") + SONOSEG_CLI + "'";
    const auto in = testing::scratch_dir("accept-cohort");
    const auto a = testing::scratch_dir("accept-run-a"), b = testing::scratch_dir("accept-run-b");
    if (sh(cli + " phantom --cohort 3:3 --seed 19 --out '" + in.string() + "'") != 0) return {false, "phantom failed"};
    const int ca = sh(cli + " run --input '" + in.string() + "' --out '" + a.string() + "' --deterministic --roc");
    const int cb = sh(cli + " run --input '" + in.string() + "' --out '" + b.string() + "' --deterministic --roc");
    const auto ra = slurp(a / "report.json"), rb = slurp(b / "report.json");
    return {ca == 0 && cb == 0 && !ra.empty() && ra == rb,
            fmt("exit codes %d/%d, report.json %zu bytes, %s", ca, cb, ra.size(), ra == rb ? "identical" : "different")};
}

}  // namespace

int main() {
    report("emd reconstruction", emd_reconstruction);
    report("otsu exhaustive oracle", otsu_oracle);
    report("diffusion max principle", diffusion_max_principle);
    report("spectral identities", spectral_identities);
    report("morphometric analytic shapes", morphometric_shapes);
    report("auc equals concordance", auc_oracle);
    report("segmentation width error", segmentation_accuracy);
    report("characterization on planted cohort", characterization);
    report("margin definition ordering", margin_ordering);
    report("cli determinism", cli_determinism);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
