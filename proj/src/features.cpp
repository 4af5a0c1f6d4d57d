#include "sonoseg/features.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <set>

#include "sonoseg/error.hpp"

namespace sonoseg {

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {
        "echogenicity", "heterogeneity",   "fnpa",        "fnpa_midband", "cooccurrence_contrast",
        "hurst",        "margin_definition", "aspect_ratio", "compactness",  "compactness_raw",
        "roundness",    "roundness_raw",   "convexity",   "solidity",     "form_factor",
    };
    return names;
}

double FeatureVector::at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw Error("missing feature: " + name);
    return it->second;
}

std::optional<double> FeatureVector::get(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) return std::nullopt;
    return it->second;
}

namespace {

long floor_div(long a, long b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }
long ceil_div(long a, long b) { return -floor_div(-a, b); }

// Pixels whose centres lie in the convex hull of the contour pixel centres.
// Integer vertices keep the row intervals exact.
std::size_t hull_pixel_count(const std::vector<PixelIndex>& contour) {
    std::vector<geom::Point> pts;
    pts.reserve(contour.size());
    for (auto p : contour) pts.push_back({static_cast<double>(p.col), static_cast<double>(p.row)});
    const auto hull = geom::convex_hull(pts);
    if (hull.empty()) return 0;
    long y0 = std::lround(hull[0].y), y1 = y0;
    for (const auto& h : hull) {
        y0 = std::min(y0, std::lround(h.y));
        y1 = std::max(y1, std::lround(h.y));
    }
    std::size_t count = 0;
    for (long y = y0; y <= y1; ++y) {
        long lo = std::numeric_limits<long>::max(), hi = std::numeric_limits<long>::min();
        for (std::size_t i = 0, n = hull.size(); i < n; ++i) {
            const long px = std::lround(hull[i].x), py = std::lround(hull[i].y);
            const long qx = std::lround(hull[(i + 1) % n].x), qy = std::lround(hull[(i + 1) % n].y);
            if (y < std::min(py, qy) || y > std::max(py, qy)) continue;
            if (py == qy) {
                lo = std::min({lo, px, qx});
                hi = std::max({hi, px, qx});
                continue;
            }
            long num = px * (qy - py) + (y - py) * (qx - px), den = qy - py;
            if (den < 0) {
                num = -num;
                den = -den;
            }
            lo = std::min(lo, ceil_div(num, den));
            hi = std::max(hi, floor_div(num, den));
        }
        if (hi >= lo) count += static_cast<std::size_t>(hi - lo + 1);
    }
    return count;
}

}  // namespace

RoiGeometry roi_geometry(const LesionROI& roi) {
    const double dx = roi.spacing.lateral_mm, dy = roi.spacing.axial_mm;
    std::vector<geom::Point> corners;
    corners.reserve(roi.contour.size() * 4);
    for (auto p : roi.contour) {
        const double x = static_cast<double>(p.col) * dx, y = static_cast<double>(p.row) * dy;
        for (double ox : {-0.5, 0.5})
            for (double oy : {-0.5, 0.5}) corners.push_back({x + ox * dx, y + oy * dy});
    }
    RoiGeometry g;
    g.convex_hull = geom::convex_hull(corners);
    g.convex_area_mm2 = static_cast<double>(std::max(hull_pixel_count(roi.contour), roi.pixel_count)) * dx * dy;
    g.max_diameter_mm = roi.max_diameter_mm;
    g.convex_perimeter_mm = geom::polygon_perimeter(geom::convex_hull(contour_points_mm(roi)));
    return g;
}

Morphometrics morphometrics(const LesionROI& roi) {
    if (roi.width_mm <= 0.0 || roi.depth_mm <= 0.0 || roi.max_diameter_mm <= 0.0 || roi.perimeter_mm <= 0.0)
        throw Error("degenerate ROI");
    const auto g = roi_geometry(roi);
    const double a = roi.area_mm2, d = roi.max_diameter_mm, p = roi.perimeter_mm;
    Morphometrics m;
    m.aspect_ratio = roi.depth_mm / roi.width_mm;
    m.roundness_raw = a / (d * d);
    m.roundness = 4.0 * m.roundness_raw / std::numbers::pi;
    m.compactness_raw = std::sqrt(a) / d;
    m.compactness = std::sqrt(a * 4.0 / std::numbers::pi) / d;
    m.convexity = g.convex_perimeter_mm / p;
    m.solidity = a / g.convex_area_mm2;
    m.form_factor = 4.0 * std::numbers::pi * a / (p * p);
    return m;
}

namespace {

// Sample row of a window centre, in B-mode pixel units.
long cell_center_row(const ParameterImage& param, std::size_t p) {
    return static_cast<long>(p * param.hop_samples) +
           static_cast<long>(std::lround(0.5 * static_cast<double>(param.window_samples - 1)));
}

void check_shapes(const ParameterImage& param, const LesionROI& roi) {
    require(param.cols() == roi.mask.cols(), "parameter image and ROI disagree on line count");
    require(param.hop_samples > 0 && param.window_samples > 0, "parameter image missing window geometry");
}

std::vector<double> values_in(const RealGrid& g, const Mask& m) {
    std::vector<double> out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (m.data()[i] && !std::isnan(g.data()[i])) out.push_back(g.data()[i]);
    return out;
}

struct Box {
    std::size_t r0, r1, c0, c1;  // inclusive
    std::size_t rows() const { return r1 - r0 + 1; }
    std::size_t cols() const { return c1 - c0 + 1; }
};

Box bounding_box(const Mask& mask) {
    Box b{mask.rows(), 0, mask.cols(), 0};
    bool any = false;
    for (std::size_t r = 0; r < mask.rows(); ++r)
        for (std::size_t c = 0; c < mask.cols(); ++c)
            if (mask(r, c)) {
                any = true;
                b.r0 = std::min(b.r0, r);
                b.r1 = std::max(b.r1, r);
                b.c0 = std::min(b.c0, c);
                b.c1 = std::max(b.c1, c);
            }
    if (!any) throw Error("empty mask");
    return b;
}

bool in_mask(const Mask& m, long r, long c) {
    return m.contains(r, c) && m(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
}

}  // namespace

Mask cell_mask(const ParameterImage& param, const LesionROI& roi) {
    check_shapes(param, roi);
    Mask out(param.rows(), param.cols(), 0);
    for (std::size_t p = 0; p < param.rows(); ++p) {
        const long r = cell_center_row(param, p);
        for (std::size_t j = 0; j < param.cols(); ++j) out(p, j) = in_mask(roi.mask, r, static_cast<long>(j)) ? 1 : 0;
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> contour_cells(const ParameterImage& param, const LesionROI& roi) {
    check_shapes(param, roi);
    std::set<std::pair<std::size_t, std::size_t>> cells;
    const double half = 0.5 * static_cast<double>(param.window_samples - 1);
    const long last = static_cast<long>(param.rows()) - 1;
    for (auto px : roi.contour) {
        long p = std::lround((static_cast<double>(px.row) - half) / static_cast<double>(param.hop_samples));
        p = std::clamp(p, 0L, last);
        cells.insert({static_cast<std::size_t>(p), static_cast<std::size_t>(px.col)});
    }
    return {cells.begin(), cells.end()};
}

double echogenicity(const ParameterImage& param, const LesionROI& roi) {
    auto v = values_in(param.intercept, cell_mask(param, roi));
    if (v.empty()) throw Error("lesion smaller than analysis window");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double heterogeneity(const ParameterImage& param, const LesionROI& roi) {
    auto v = values_in(param.midband, cell_mask(param, roi));
    if (v.empty()) throw Error("lesion smaller than analysis window");
    if (v.size() < 2) throw Error("fewer than 2 cells in lesion");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

double fnpa(const RealGrid& image, const Mask& mask) {
    require(image.rows() == mask.rows() && image.cols() == mask.cols(), "image and mask shapes differ");
    double sum_t = 0.0, sum_x = 0.0;
    std::size_t n_t = 0, n_x = 0;
    for (long r = 0; r < static_cast<long>(image.rows()); ++r) {
        for (long c = 0; c < static_cast<long>(image.cols()); ++c) {
            if (!in_mask(mask, r, c)) continue;
            const double x = image(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
            if (std::isnan(x)) continue;
            sum_x += x;
            ++n_x;
            const long nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            double t = 0.0;
            bool interior = true;
            for (auto& q : nb) {
                if (!in_mask(mask, q[0], q[1])) {
                    interior = false;
                    break;
                }
                const double y = image(static_cast<std::size_t>(q[0]), static_cast<std::size_t>(q[1]));
                if (std::isnan(y)) {
                    interior = false;
                    break;
                }
                t += std::abs(x - y);
            }
            if (interior) {
                sum_t += 0.25 * t;
                ++n_t;
            }
        }
    }
    if (n_t == 0) throw Error("empty mask interior");
    const double mu = sum_x / static_cast<double>(n_x);
    if (mu == 0.0) throw Error("zero-mean region");
    return (sum_t / static_cast<double>(n_t)) / mu;
}

RealGrid autocorrelation(const RealGrid& image, const Mask& mask, std::size_t max_lag) {
    require(image.rows() == mask.rows() && image.cols() == mask.cols(), "image and mask shapes differ");
    const Box b = bounding_box(mask);
    if (b.rows() < max_lag + 2 || b.cols() < max_lag + 2) throw Error("region too small for autocorrelation");
    const std::size_t m = b.rows(), n = b.cols();
    double mean = 0.0;
    for (std::size_t r = b.r0; r <= b.r1; ++r)
        for (std::size_t c = b.c0; c <= b.c1; ++c) mean += image(r, c);
    mean /= static_cast<double>(m * n);

    auto lagged = [&](std::size_t dm, std::size_t dn) {
        double s = 0.0;
        for (std::size_t x = 0; x + dm < m; ++x)
            for (std::size_t y = 0; y + dn < n; ++y)
                s += (image(b.r0 + x, b.c0 + y) - mean) * (image(b.r0 + x + dm, b.c0 + y + dn) - mean);
        return s / static_cast<double>((m - dm) * (n - dn));
    };
    const double a0 = lagged(0, 0);
    if (!(a0 > 0.0)) throw Error("zero variance");
    RealGrid gamma(max_lag + 1, max_lag + 1);
    for (std::size_t dm = 0; dm <= max_lag; ++dm)
        for (std::size_t dn = 0; dn <= max_lag; ++dn) gamma(dm, dn) = (dm == 0 && dn == 0) ? 1.0 : lagged(dm, dn) / a0;
    return gamma;
}

double cooccurrence_contrast(const RealGrid& image, const Mask& mask, int levels,
                             std::optional<std::pair<double, double>> range) {
    require(image.rows() == mask.rows() && image.cols() == mask.cols(), "image and mask shapes differ");
    require(levels >= 2, "co-occurrence needs at least 2 levels");
    double lo = 0.0, hi = 0.0;
    if (range) {
        std::tie(lo, hi) = *range;
        require(lo < hi, "quantization range must satisfy lo < hi");
    } else {
        auto v = values_in(image, mask);
        if (v.empty()) throw Error("empty mask");
        auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        lo = *mn;
        hi = *mx;
        if (lo == hi) return 0.0;
    }
    auto level = [&](double x) {
        const long q = static_cast<long>(std::floor((x - lo) / (hi - lo) * levels));
        return std::clamp(q, 0L, static_cast<long>(levels - 1));
    };

    double total = 0.0;
    int offsets_used = 0;
    for (auto [dr, dc] : {std::pair{0L, 1L}, std::pair{1L, 0L}}) {
        double sum = 0.0, pairs = 0.0;
        for (long r = 0; r < static_cast<long>(image.rows()); ++r)
            for (long c = 0; c < static_cast<long>(image.cols()); ++c) {
                if (!in_mask(mask, r, c) || !in_mask(mask, r + dr, c + dc)) continue;
                const double a = image(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
                const double b = image(static_cast<std::size_t>(r + dr), static_cast<std::size_t>(c + dc));
                if (std::isnan(a) || std::isnan(b)) continue;
                const double d = static_cast<double>(level(a) - level(b));
                sum += d * d;
                pairs += 1.0;
            }
        if (pairs > 0.0) {
            total += sum / pairs;
            ++offsets_used;
        }
    }
    return offsets_used ? total / offsets_used : 0.0;
}

double hurst(const RealGrid& image, const Mask& mask, std::size_t max_lag) {
    require(image.rows() == mask.rows() && image.cols() == mask.cols(), "image and mask shapes differ");
    require(max_lag >= 2, "hurst needs at least 2 lags");
    const Box b = bounding_box(mask);
    if (b.rows() < 16 || b.cols() < 16) throw Error("region too small for hurst estimate");

    std::vector<double> lx, ly;
    for (std::size_t h = 1; h <= max_lag; ++h) {
        const long lag = static_cast<long>(h);
        double dir_mean[2] = {0.0, 0.0};
        int dirs = 0;
        for (auto [dr, dc] : {std::pair{0L, lag}, std::pair{lag, 0L}}) {
            double s = 0.0, n = 0.0;
            for (long r = static_cast<long>(b.r0); r <= static_cast<long>(b.r1); ++r)
                for (long c = static_cast<long>(b.c0); c <= static_cast<long>(b.c1); ++c) {
                    if (!in_mask(mask, r, c) || !in_mask(mask, r + dr, c + dc)) continue;
                    s += std::abs(image(static_cast<std::size_t>(r + dr), static_cast<std::size_t>(c + dc)) -
                                  image(static_cast<std::size_t>(r), static_cast<std::size_t>(c)));
                    n += 1.0;
                }
            if (n > 0.0) dir_mean[dirs++] = s / n;
        }
        if (dirs == 0) continue;
        const double v = (dir_mean[0] + dir_mean[1]) / dirs;
        if (v <= 0.0) continue;
        lx.push_back(std::log(static_cast<double>(h)));
        ly.push_back(std::log(v));
    }
    if (lx.size() < 2) throw Error("zero variance");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(lx.size());
    my /= static_cast<double>(lx.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    return std::clamp(sxy / sxx, 0.0, 1.0);
}

double margin_definition(const ParameterImage& param, const LesionROI& roi) {
    const auto cells = contour_cells(param, roi);
    if (cells.size() < 8) throw Error("contour covers fewer than 8 parameter cells");
    const RealGrid& m = param.midband;
    const long rows = static_cast<long>(m.rows()), cols = static_cast<long>(m.cols());
    auto value = [&](long r, long c) -> std::optional<double> {
        if (r < 0 || c < 0 || r >= rows || c >= cols) return std::nullopt;
        const double v = m(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        if (std::isnan(v)) return std::nullopt;
        return v;
    };
    // Central difference, one-sided where a neighbour is unavailable.
    auto derivative = [&](long r, long c, long dr, long dc, double centre) {
        auto fwd = value(r + dr, c + dc), bwd = value(r - dr, c - dc);
        if (fwd && bwd) return 0.5 * (*fwd - *bwd);
        if (fwd) return *fwd - centre;
        if (bwd) return centre - *bwd;
        return 0.0;
    };

    double grad_sum = 0.0, mag_sum = 0.0;
    for (auto [p, j] : cells) {
        const long r = static_cast<long>(p), c = static_cast<long>(j);
        auto centre = value(r, c);
        if (!centre) continue;
        const double gx = derivative(r, c, 0, 1, *centre);
        const double gy = derivative(r, c, 1, 0, *centre);
        grad_sum += std::hypot(gx, gy);
        mag_sum += std::abs(*centre);
    }
    if (mag_sum == 0.0) throw Error("zero midband on contour");
    return grad_sum / mag_sum;
}

FeatureVector extract_features(const BModeImage& bmode, const ParameterImage& param, const LesionROI& roi,
                               const FeatureConfig& config) {
    require(bmode.pixels.rows() == roi.mask.rows() && bmode.pixels.cols() == roi.mask.cols(),
            "B-mode and ROI shapes differ");
    FeatureVector fv;
    fv.pixels = roi.pixel_count;
    const RealGrid image = grid_cast<double>(bmode.pixels);

    auto attempt = [&](const std::string& name, const std::function<double()>& fn) {
        try {
            fv.values[name] = fn();
        } catch (const std::exception& e) {
            fv.missing[name] = e.what();
        }
    };

    Mask cells;
    try {
        cells = cell_mask(param, roi);
        fv.spectral_cells = static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1));
        fv.contour_cells = contour_cells(param, roi).size();
    } catch (const std::exception&) {
    }

    attempt("echogenicity", [&] { return echogenicity(param, roi); });
    attempt("heterogeneity", [&] { return heterogeneity(param, roi); });
    attempt("fnpa", [&] { return fnpa(image, roi.mask); });
    attempt("fnpa_midband", [&] {
        if (cells.empty()) throw Error("lesion smaller than analysis window");
        return fnpa(param.midband, cells);
    });
    attempt("cooccurrence_contrast", [&] { return cooccurrence_contrast(image, roi.mask, config.cooccurrence_levels); });
    attempt("hurst", [&] { return hurst(image, roi.mask, config.hurst_max_lag); });
    attempt("margin_definition", [&] { return margin_definition(param, roi); });
    try {
        fv.autocorrelation = autocorrelation(image, roi.mask, config.autocorrelation_max_lag);
    } catch (const std::exception& e) {
        fv.missing["autocorrelation"] = e.what();
    }

    try {
        const auto m = morphometrics(roi);
        fv.values["aspect_ratio"] = m.aspect_ratio;
        fv.values["compactness"] = m.compactness;
        fv.values["compactness_raw"] = m.compactness_raw;
        fv.values["roundness"] = m.roundness;
        fv.values["roundness_raw"] = m.roundness_raw;
        fv.values["convexity"] = m.convexity;
        fv.values["solidity"] = m.solidity;
        fv.values["form_factor"] = m.form_factor;
    } catch (const std::exception& e) {
        for (const char* n : {"aspect_ratio", "compactness", "compactness_raw", "roundness", "roundness_raw",
                              "convexity", "solidity", "form_factor"})
            fv.missing[n] = e.what();
    }
    return fv;
}

}  // namespace sonoseg
