#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "sonoseg/error.hpp"
#include "sonoseg/frame_io.hpp"
#include "sonoseg/phantom.hpp"
#include "support.hpp"

using namespace sonoseg;
namespace fs = std::filesystem;

namespace {

RFFrame small_frame() {
    RFFrame f;
    f.samples = Grid<std::int16_t>(2, 4, std::vector<std::int16_t>{1, -2, 300, -32768, 32767, 0, -1, 42});
    f.sampling_rate_hz = 40e6;
    f.center_frequency_hz = 10e6;
    f.axial_spacing_mm = 0.01925;
    f.lateral_spacing_mm = 0.15;
    f.frame_id = "tiny";
    return f;
}

EnvelopeImage single_line_env(std::vector<double> v) {
    EnvelopeImage e{RealGrid(v.size(), 1, 0.0), {1, 1}};
    e.values.set_column(0, v);
    return e;
}

}  // namespace

TEST_CASE("2x4 frame round-trips through a container") {
    auto dir = testing::scratch_dir("frame-rt");
    const RFFrame f = small_frame();
    save_rf_frame(f, dir / "tiny");
    const RFFrame g = load_rf_frame(dir / "tiny");
    CHECK(g.samples == f.samples);
    CHECK(g.sampling_rate_hz == f.sampling_rate_hz);
    CHECK(g.center_frequency_hz == f.center_frequency_hz);
    CHECK(g.axial_spacing_mm == f.axial_spacing_mm);
    CHECK(g.lateral_spacing_mm == f.lateral_spacing_mm);
    CHECK(g.frame_id == f.frame_id);
}

TEST_CASE("payload is little-endian int16, line-major") {
    const std::string bytes = rf_payload(small_frame());
    REQUIRE(bytes.size() == 16);
    // line 0 = samples (0,0)=1 then (1,0)=32767
    CHECK(static_cast<unsigned char>(bytes[0]) == 0x01);
    CHECK(static_cast<unsigned char>(bytes[1]) == 0x00);
    CHECK(static_cast<unsigned char>(bytes[2]) == 0xff);
    CHECK(static_cast<unsigned char>(bytes[3]) == 0x7f);
    // line 3 starts with (0,3) = -32768
    CHECK(static_cast<unsigned char>(bytes[12]) == 0x00);
    CHECK(static_cast<unsigned char>(bytes[13]) == 0x80);
}

TEST_CASE("save then load is byte-identical on the payload") {
    std::mt19937_64 rng(5);
    RFFrame f = small_frame();
    f.samples = Grid<std::int16_t>(64, 7);
    for (auto& v : f.samples) v = static_cast<std::int16_t>(rng());
    auto dir = testing::scratch_dir("frame-bytes");
    save_rf_frame(f, dir / "c");
    std::ifstream in(dir / "c" / "rf.bin", std::ios::binary);
    std::string disk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(disk == rf_payload(f));
    CHECK(rf_payload(load_rf_frame(dir / "c")) == disk);
}

TEST_CASE("header declaring 1000 samples with 999 stored fails") {
    RFFrame f = small_frame();
    f.samples = Grid<std::int16_t>(1000, 1, std::int16_t{0});
    std::string header = rf_header_json(f);
    std::string payload(999 * 2, '\0');
    CHECK_THROWS_WITH_AS(parse_rf_frame(header, payload), "sample count mismatch", Error);
}

TEST_CASE("malformed header and Nyquist violation are rejected") {
    RFFrame f = small_frame();
    CHECK_THROWS_AS(parse_rf_frame("{not json", rf_payload(f)), Error);
    CHECK_THROWS_AS(parse_rf_frame(R"({"samples_per_line": 2})", rf_payload(f)), Error);
    f.center_frequency_hz = 25e6;
    CHECK_THROWS_AS(f.validate(), Error);
    CHECK_THROWS_AS(parse_rf_frame(rf_header_json(f), rf_payload(f)), Error);
}

TEST_CASE("512x128 phantom at 40 MHz loads with its metadata") {
    PhantomSpec spec;
    spec.samples_per_line = 512;
    spec.lesion.center_depth_mm = 4.9;
    spec.lesion.semi_axis_depth_mm = 2.0;
    const Phantom ph = generate(spec);
    auto dir = testing::scratch_dir("frame-phantom");
    write_phantom(ph, dir);
    const RFFrame f = load_rf_frame(dir / spec.frame_id);
    CHECK(f.sampling_rate_hz == 4.0e7);
    CHECK(f.samples_per_line() == 512);
    CHECK(f.num_lines() == 128);
    CHECK(f.samples == ph.frame.samples);
}

TEST_CASE("calibration file round-trips and validates") {
    CalibrationSet cal;
    cal.frequencies_hz = {0, 5e6, 10e6, 20e6};
    cal.transfer_db = {1, 2, 3, 4};
    cal.depths_mm = {0, 10};
    cal.diffraction_db = {{0, 0, 0, 0}, {1, 1, 2, 2}};
    cal.attenuation_db_per_mhz_cm = 0.5;
    auto dir = testing::scratch_dir("cal");
    save_calibration(cal, dir / "cal.json");
    const CalibrationSet back = load_calibration(dir / "cal.json");
    CHECK(back.frequencies_hz == cal.frequencies_hz);
    CHECK(back.transfer_db == cal.transfer_db);
    CHECK(back.depths_mm == cal.depths_mm);
    CHECK(back.diffraction_db == cal.diffraction_db);
    CHECK(back.attenuation_db_per_mhz_cm == 0.5);

    const std::vector<double> f = {2.5e6, 15e6};
    auto t = cal.transfer_at(f);
    CHECK(t[0] == doctest::Approx(1.5));
    CHECK(t[1] == doctest::Approx(3.5));
    auto d = cal.diffraction_at(5.0, f);  // halfway in depth
    CHECK(d[0] == doctest::Approx(0.5));
    CHECK(d[1] == doctest::Approx(1.0));
    CHECK(cal.diffraction_at(50.0, f)[1] == doctest::Approx(2.0));  // clamped

    CalibrationSet bad = cal;
    bad.frequencies_hz = {0, 5e6, 5e6, 20e6};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = cal;
    bad.attenuation_db_per_mhz_cm = -1;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("envelope of a pure tone is its amplitude away from the ends") {
    const double A = 1234.5;
    std::vector<double> x(2048);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = A * std::sin(2 * std::numbers::pi * 0.0917 * static_cast<double>(i));
    auto env = analytic_magnitude(x);
    for (std::size_t i = 100; i < x.size() - 100; ++i) CHECK(std::abs(env[i] - A) <= 0.01 * A);
}

TEST_CASE("envelope of an all-zero line is zero") {
    std::vector<double> x(300, 0.0);
    for (double v : analytic_magnitude(x)) CHECK(v == 0.0);
}

TEST_CASE("envelope follows a slow amplitude modulation") {
    const std::size_t n = 4096;
    std::vector<double> x(n), a(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i);
        a[i] = 100.0 + 60.0 * std::sin(2 * std::numbers::pi * t / 1500.0);
        x[i] = a[i] * std::sin(2 * std::numbers::pi * 0.21 * t);
    }
    auto env = analytic_magnitude(x);
    for (std::size_t i = 200; i < n - 200; ++i) CHECK(std::abs(env[i] - a[i]) <= 0.02 * a[i]);
}

TEST_CASE("envelope is non-negative, shape-preserving and scale-equivariant") {
    std::mt19937_64 rng(11);
    RFFrame f = small_frame();
    f.samples = Grid<std::int16_t>(256, 5);
    std::uniform_int_distribution<int> u(-1000, 1000);
    for (auto& v : f.samples) v = static_cast<std::int16_t>(u(rng));
    RFFrame g = f;
    for (auto& v : g.samples) v = static_cast<std::int16_t>(3 * v);
    auto ef = detect_envelope(f), eg = detect_envelope(g);
    REQUIRE(ef.values.rows() == 256);
    REQUIRE(ef.values.cols() == 5);
    for (std::size_t k = 0; k < ef.values.size(); ++k) {
        CHECK(ef.values.data()[k] >= 0.0);
        CHECK(eg.values.data()[k] == doctest::Approx(3.0 * ef.values.data()[k]).epsilon(1e-9));
    }
}

TEST_CASE("B-mode log compression") {
    SUBCASE("constant envelope maps to 255") {
        auto b = form_bmode(single_line_env({7, 7, 7}), 50);
        for (auto p : b.pixels) CHECK(p == 255);
    }
    SUBCASE("exactly -DR maps to 0") {
        auto b = form_bmode(single_line_env({1.0, std::pow(10.0, -50.0 / 20.0)}), 50);
        CHECK(b.pixels(0, 0) == 255);
        CHECK(b.pixels(1, 0) == 0);
    }
    SUBCASE("{1, 10, 100} at 40 dB gives {0, 128, 255}") {
        auto b = form_bmode(single_line_env({1, 10, 100}), 40);
        CHECK(b.pixels(0, 0) == 0);
        CHECK(b.pixels(1, 0) == 128);
        CHECK(b.pixels(2, 0) == 255);
    }
    SUBCASE("all-zero envelope is an error") {
        CHECK_THROWS_WITH_AS(form_bmode(single_line_env({0, 0}), 50), "empty image", Error);
    }
    SUBCASE("invariant to positive scaling") {
        std::mt19937_64 rng(3);
        auto v = testing::random_grid(40, 3, rng, 0.0, 10.0);
        EnvelopeImage a{v, {1, 1}}, b{v, {1, 1}};
        for (auto& x : b.values) x *= 17.25;
        CHECK(form_bmode(a).pixels == form_bmode(b).pixels);
    }
}
