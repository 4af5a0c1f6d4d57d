#include "sonoseg/emd.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "sonoseg/error.hpp"
#include "sonoseg/parallel.hpp"

namespace sonoseg::emd {

void EmdParams::validate() const {
    require(num_imfs >= 1, "num_imfs must be >= 1");
    require(max_sift_iterations >= 1, "max_sift_iterations must be >= 1");
    require(sift_sd_threshold > 0.0, "sift_sd_threshold must be positive");
}

Extrema find_extrema(std::span<const double> s) {
    Extrema ext;
    const std::size_t n = s.size();
    if (n < 3) return ext;
    std::size_t a = 1;
    while (a + 1 < n) {
        std::size_t b = a;
        while (b + 1 < n && s[b + 1] == s[a]) ++b;
        if (b + 1 >= n) break;  // run reaches the last sample
        const double left = s[a - 1], right = s[b + 1], v = s[a];
        const std::size_t mid = a + (b - a) / 2;
        if (left < v && right < v) ext.maxima.push_back(mid);
        else if (left > v && right > v) ext.minima.push_back(mid);
        a = b + 1;
    }
    return ext;
}

std::size_t count_zero_crossings(std::span<const double> s) {
    std::size_t count = 0;
    int prev = 0;
    for (double v : s) {
        int sign = (v > 0.0) - (v < 0.0);
        if (sign == 0) continue;
        if (prev != 0 && sign != prev) ++count;
        prev = sign;
    }
    return count;
}

namespace {

// Second derivatives of the natural cubic spline (Thomas algorithm).
std::vector<double> spline_moments(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    std::vector<double> m(n, 0.0);
    if (n < 3) return m;
    std::vector<double> diag(n - 2), upper(n - 2), rhs(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
        diag[i - 1] = 2.0 * (h0 + h1);
        upper[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    // Forward sweep; the sub-diagonal entry of row k is h_k = x[k+1]-x[k].
    for (std::size_t k = 1; k < diag.size(); ++k) {
        double sub = x[k + 1] - x[k];
        double w = sub / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    for (std::size_t k = diag.size(); k-- > 0;) {
        double v = rhs[k];
        if (k + 1 < diag.size()) v -= upper[k] * m[k + 2];
        m[k + 1] = v / diag[k];
    }
    return m;
}

double eval_segment(std::span<const double> x, std::span<const double> y, std::span<const double> m,
                    std::size_t k, double t) {
    const double h = x[k + 1] - x[k];
    const double a = (x[k + 1] - t) / h;
    const double b = (t - x[k]) / h;
    return a * y[k] + b * y[k + 1] + ((a * a * a - a) * m[k] + (b * b * b - b) * m[k + 1]) * h * h / 6.0;
}

}  // namespace

std::vector<double> natural_spline(std::span<const double> xs, std::span<const double> ys,
                                   std::span<const double> xs_eval) {
    require(xs.size() >= 2 && xs.size() == ys.size(), "spline needs at least two knots");
    const auto m = spline_moments(xs, ys);
    std::vector<double> out;
    out.reserve(xs_eval.size());
    for (double t : xs_eval) {
        auto it = std::upper_bound(xs.begin(), xs.end(), t);
        std::size_t k = it == xs.begin() ? 0 : static_cast<std::size_t>(it - xs.begin()) - 1;
        k = std::min(k, xs.size() - 2);
        out.push_back(eval_segment(xs, ys, m, k, t));
    }
    return out;
}

namespace {

void build_knots(std::span<const double> s, const std::vector<std::size_t>& idx, EndExtension end,
                 std::vector<double>& kx, std::vector<double>& ky) {
    kx.clear();
    ky.clear();
    const double last = static_cast<double>(s.size() - 1);
    const std::size_t mirrored = end == EndExtension::mirror ? std::min<std::size_t>(2, idx.size()) : 0;
    for (std::size_t k = mirrored; k-- > 0;) {
        kx.push_back(-static_cast<double>(idx[k]));
        ky.push_back(s[idx[k]]);
    }
    for (std::size_t i : idx) {
        kx.push_back(static_cast<double>(i));
        ky.push_back(s[i]);
    }
    for (std::size_t k = 0; k < mirrored; ++k) {
        std::size_t i = idx[idx.size() - 1 - k];
        kx.push_back(2.0 * last - static_cast<double>(i));
        ky.push_back(s[i]);
    }
}

// Evaluates the spline at 0..n-1 by walking the knot intervals once.
void eval_on_samples(std::span<const double> kx, std::span<const double> ky, std::vector<double>& out) {
    const auto m = spline_moments(kx, ky);
    std::size_t k = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = static_cast<double>(i);
        while (k + 2 < kx.size() && t > kx[k + 1]) ++k;
        out[i] = eval_segment(kx, ky, m, k, t);
    }
}

}  // namespace

bool spline_envelopes(std::span<const double> s, const Extrema& ext, Envelopes& out, EndExtension end) {
    if (ext.maxima.size() < 2 || ext.minima.size() < 2) return false;
    std::vector<double> kx, ky;
    out.upper.assign(s.size(), 0.0);
    out.lower.assign(s.size(), 0.0);
    build_knots(s, ext.maxima, end, kx, ky);
    eval_on_samples(kx, ky, out.upper);
    build_knots(s, ext.minima, end, kx, ky);
    eval_on_samples(kx, ky, out.lower);
    return true;
}

namespace {

bool is_imf_shaped(std::span<const double> h) {
    auto ext = find_extrema(h);
    auto n_ext = static_cast<long>(ext.maxima.size() + ext.minima.size());
    auto n_zc = static_cast<long>(count_zero_crossings(h));
    return std::abs(n_ext - n_zc) <= 1;
}

}  // namespace

Decomposition decompose(std::span<const double> signal, const EmdParams& params) {
    params.validate();
    Decomposition out;
    out.residue.assign(signal.begin(), signal.end());
    if (signal.size() < 4) return out;

    const std::size_t n = signal.size();
    Envelopes env;
    std::vector<double> h(n);
    for (int q = 0; q < params.num_imfs; ++q) {
        auto ext = find_extrema(out.residue);
        if (ext.maxima.size() < 2 || ext.minima.size() < 2) break;

        h = out.residue;
        for (int it = 0; it < params.max_sift_iterations; ++it) {
            if (it > 0) ext = find_extrema(h);
            if (!spline_envelopes(h, ext, env)) break;
            double change = 0.0, energy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double mean = 0.5 * (env.upper[i] + env.lower[i]);
                energy += h[i] * h[i];
                change += mean * mean;
                h[i] -= mean;
            }
            if (energy == 0.0) break;
            // Huang's SD criterion, combined with the extrema/zero-crossing
            // balance so every accepted component is IMF-shaped.
            if (change / energy < params.sift_sd_threshold && is_imf_shaped(h)) break;
        }
        for (std::size_t i = 0; i < n; ++i) out.residue[i] -= h[i];
        out.imfs.push_back(h);
    }
    return out;
}

RealGrid residue_image(const RealGrid& env, const EmdParams& params) {
    params.validate();
    RealGrid out(env.rows(), env.cols());
    parallel_for(env.cols(), [&](std::size_t j) {
        auto d = decompose(env.column(j), params);
        out.set_column(j, d.residue);
    });
    return out;
}

void dump_imfs(const RealGrid& env, const EmdParams& params, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t j = 0; j < env.cols(); ++j) {
        auto d = decompose(env.column(j), params);
        std::ofstream csv(dir / ("line_" + std::to_string(j) + ".csv"));
        for (std::size_t q = 0; q < d.imfs.size(); ++q) csv << "imf" << (q + 1) << ',';
        csv << "residue\n" << std::setprecision(17);
        for (std::size_t i = 0; i < d.residue.size(); ++i) {
            for (const auto& imf : d.imfs) csv << imf[i] << ',';
            csv << d.residue[i] << '\n';
        }
    }
}

}  // namespace sonoseg::emd
