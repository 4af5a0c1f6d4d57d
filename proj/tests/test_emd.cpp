#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "sonoseg/emd.hpp"
#include "sonoseg/frame_io.hpp"
#include "sonoseg/phantom.hpp"
#include "support.hpp"

using namespace sonoseg;
using namespace sonoseg::emd;

namespace {

std::vector<double> random_signal(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g;
    std::vector<double> s(n);
    double walk = 0.0;
    for (auto& v : s) {
        walk += 0.05 * g(rng);
        v = g(rng) + walk;
    }
    return s;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::size_t centred_crossings(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    std::vector<double> c(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) c[i] = v[i] - m;
    return count_zero_crossings(c);
}

}  // namespace

TEST_CASE("extrema") {
    SUBCASE("monotone sequence has none") {
        std::vector<double> s{1, 2, 3, 5, 8, 13};
        auto e = find_extrema(s);
        CHECK(e.maxima.empty());
        CHECK(e.minima.empty());
    }
    SUBCASE("[0, 1, 0, -1, 0]") {
        std::vector<double> s{0, 1, 0, -1, 0};
        auto e = find_extrema(s);
        CHECK(e.maxima == std::vector<std::size_t>{1});
        CHECK(e.minima == std::vector<std::size_t>{3});
    }
    SUBCASE("plateau contributes its lower midpoint once") {
        std::vector<double> s{0, 2, 2, 0};
        auto e = find_extrema(s);
        CHECK(e.maxima == std::vector<std::size_t>{1});
        CHECK(e.minima.empty());
        std::vector<double> t{5, 1, 1, 1, 5};
        CHECK(find_extrema(t).minima == std::vector<std::size_t>{2});
    }
    SUBCASE("shoulders are not extrema") {
        std::vector<double> s{0, 1, 1, 2, 0};
        auto e = find_extrema(s);
        CHECK(e.maxima == std::vector<std::size_t>{3});
    }
}

TEST_CASE("zero crossings skip exact zeros") {
    std::vector<double> s{1, 0, -1, 0, 0, 2, -3};
    CHECK(count_zero_crossings(s) == 3);
}

TEST_CASE("natural spline reproduces a cubic away from the ends") {
    std::vector<double> xs, ys, ev;
    auto p = [](double x) { return 0.001 * std::pow(x - 30.0, 3) - 0.2 * x * x + x - 4.0; };
    for (int i = 0; i <= 60; ++i) {
        xs.push_back(i);
        ys.push_back(p(i));
    }
    for (double t = 20.0; t <= 40.0; t += 0.25) ev.push_back(t);
    auto out = natural_spline(xs, ys, ev);
    for (std::size_t k = 0; k < ev.size(); ++k) CHECK(std::abs(out[k] - p(ev[k])) <= 1e-9 * 300.0);
}

TEST_CASE("two-knot spline is the line through them") {
    std::vector<double> xs{2, 10}, ys{1, 5}, ev{0, 2, 6, 10, 12};
    auto out = natural_spline(xs, ys, ev);
    for (std::size_t k = 0; k < ev.size(); ++k) CHECK(out[k] == doctest::Approx(1 + 0.5 * (ev[k] - 2)));
}

TEST_CASE("envelopes of a dense sinusoid are +-A and touch the knots") {
    const double A = 3.0;
    std::vector<double> s(2000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = A * std::sin(2 * std::numbers::pi * static_cast<double>(i) / 47.3);
    auto ext = find_extrema(s);
    Envelopes env;
    REQUIRE(spline_envelopes(s, ext, env));
    for (std::size_t i = 100; i < s.size() - 100; ++i) {
        CHECK(std::abs(env.upper[i] - A) <= 0.02 * A);
        CHECK(std::abs(env.lower[i] + A) <= 0.02 * A);
    }
    for (auto i : ext.maxima) CHECK(env.upper[i] == doctest::Approx(s[i]).epsilon(1e-12));
    for (auto i : ext.minima) CHECK(env.lower[i] == doctest::Approx(s[i]).epsilon(1e-12));
    Extrema few{{10}, {20, 30}};
    CHECK_FALSE(spline_envelopes(s, few, env));
}

TEST_CASE("monotone ramp has no IMFs") {
    std::vector<double> s(100);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.5 * static_cast<double>(i) * static_cast<double>(i);
    auto d = decompose(s);
    CHECK(d.imfs.empty());
    CHECK(d.residue == s);
}

TEST_CASE("reconstruction, IMF shape and local-mean bound on random signals") {
    std::mt19937_64 rng(17);
    EmdParams params;
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 256 + rng() % 1793;
        const auto s = random_signal(rng, n);
        const auto d = decompose(s, params);
        REQUIRE(d.imfs.size() <= static_cast<std::size_t>(params.num_imfs));
        std::vector<double> sum = d.residue;
        for (const auto& imf : d.imfs)
            for (std::size_t i = 0; i < n; ++i) sum[i] += imf[i];
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(sum[i] - s[i]));
        CHECK(err <= 1e-9 * max_abs(s));

        double rms = 0.0;
        for (double v : s) rms += v * v;
        rms = std::sqrt(rms / static_cast<double>(n));
        for (const auto& imf : d.imfs) {
            auto ext = find_extrema(imf);
            long ne = static_cast<long>(ext.maxima.size() + ext.minima.size());
            long nz = static_cast<long>(count_zero_crossings(imf));
            CHECK(std::abs(ne - nz) <= 1);
            Envelopes env;
            if (spline_envelopes(imf, ext, env)) {
                double m = 0.0;
                for (std::size_t i = 0; i < n; ++i) m += std::abs(0.5 * (env.upper[i] + env.lower[i]));
                CHECK(m / static_cast<double>(n) <= params.sift_sd_threshold * rms);
            }
        }
    }
}

TEST_CASE("decomposition is deterministic") {
    std::mt19937_64 rng(23);
    const auto s = random_signal(rng, 777);
    const auto a = decompose(s), b = decompose(s);
    CHECK(a.imfs == b.imfs);
    CHECK(a.residue == b.residue);
}

TEST_CASE("tone plus trend separates into IMF and residue") {
    const std::size_t n = 600;
    std::vector<double> s(n), tone(n), trend(n);
    for (std::size_t i = 0; i < n; ++i) {
        tone[i] = std::sin(2 * std::numbers::pi * static_cast<double>(i) / 10.0);
        trend[i] = 0.02 * static_cast<double>(i);
        s[i] = tone[i] + trend[i];
    }
    EmdParams p;
    p.num_imfs = 1;
    auto d = decompose(s, p);
    REQUIRE(d.imfs.size() == 1);
    CHECK(correlation(d.imfs[0], tone) > 0.95);
    double worst = 0.0;
    for (std::size_t i = 20; i < n - 20; ++i) worst = std::max(worst, std::abs(d.residue[i] - trend[i]));
    CHECK(worst < 0.1);
}

TEST_CASE("residue image") {
    SUBCASE("monotone lines are returned unchanged") {
        RealGrid g(50, 4);
        for (std::size_t r = 0; r < 50; ++r)
            for (std::size_t c = 0; c < 4; ++c) g(r, c) = static_cast<double>(r * (c + 1));
        CHECK(residue_image(g) == g);
    }
    SUBCASE("identical lines give identical residues") {
        std::mt19937_64 rng(3);
        auto line = random_signal(rng, 300);
        RealGrid g(300, 6);
        for (std::size_t c = 0; c < 6; ++c) g.set_column(c, line);
        auto r = residue_image(g);
        for (std::size_t c = 1; c < 6; ++c) CHECK(r.column(c) == r.column(0));
    }
    SUBCASE("speckle lines get smoother") {
        PhantomSpec spec;
        spec.speckle_seed = 31;
        const auto env = detect_envelope(generate(spec).frame);
        const auto res = residue_image(env.values);
        for (std::size_t c = 0; c < env.values.cols(); c += 9)
            CHECK(centred_crossings(res.column(c)) <= centred_crossings(env.values.column(c)));
    }
}

TEST_CASE("IMF dump writes one CSV per line") {
    std::mt19937_64 rng(8);
    RealGrid g(128, 3);
    for (std::size_t c = 0; c < 3; ++c) g.set_column(c, random_signal(rng, 128));
    auto dir = testing::scratch_dir("imfs");
    dump_imfs(g, {}, dir);
    for (int c = 0; c < 3; ++c) CHECK(std::filesystem::exists(dir / ("line_" + std::to_string(c) + ".csv")));
    std::ifstream in(dir / "line_0.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("imf1,", 0) == 0);
    CHECK(header.substr(header.size() - 7) == "residue");
}
