#include "sonoseg/segmentation.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <deque>
#include <numeric>

#include "sonoseg/error.hpp"
#include "sonoseg/preprocess.hpp"

namespace sonoseg {

std::string to_string(Polarity p) {
    switch (p) {
        case Polarity::automatic: return "auto";
        case Polarity::bright: return "bright";
        case Polarity::dark: return "dark";
    }
    return "auto";
}

void SegmentationParams::validate() const {
    require(min_region_area_mm2 >= 0.0, "min_region_area must be non-negative");
    require(connectivity == 4 || connectivity == 8, "connectivity must be 4 or 8");
}

// ---------------------------------------------------------------------------
// Otsu

namespace {

struct BinStats {
    std::array<double, kHistogramBins> count{};
    std::array<double, kHistogramBins> sum{};
};

bool all_integral(const RealGrid& image) {
    return std::all_of(image.begin(), image.end(),
                       [](double v) { return std::abs(v) < 65536.0 && v == std::floor(v); });
}

// a/b > c/d for non-negative integers, by continued-fraction expansion so
// no product ever overflows.
bool fraction_greater(unsigned __int128 a, unsigned __int128 b, unsigned __int128 c, unsigned __int128 d) {
    bool flip = false;
    for (;;) {
        unsigned __int128 qa = a / b, qc = c / d;
        if (qa != qc) return (qa > qc) != flip;
        unsigned __int128 ra = a % b, rc = c % d;
        if (ra == 0 || rc == 0) {
            if (ra == rc) return false;
            return (ra != 0) != flip;
        }
        // Compare b/ra against d/rc with the order reversed.
        a = b;
        b = ra;
        c = d;
        d = rc;
        flip = !flip;
    }
}

}  // namespace

int otsu_bin(const RealGrid& image) {
    require(!image.empty(), "empty image");
    auto [lo_it, hi_it] = std::minmax_element(image.begin(), image.end());
    const double lo = *lo_it, hi = *hi_it;
    if (lo == hi) throw Error("no threshold exists");

    BinStats st;
    for (double v : image) {
        auto b = static_cast<std::size_t>(histogram_bin(v, lo, hi));
        st.count[b] += 1.0;
        st.sum[b] += v;
    }
    const double n = static_cast<double>(image.size());
    const double total = std::accumulate(st.sum.begin(), st.sum.end(), 0.0);

    int best = -1;
    if (all_integral(image) && image.size() < (1u << 24)) {
        // Exact path for integer images: maximize S0^2/n0 + S1^2/n1, i.e.
        // (S0^2 n1 + S1^2 n0) / (n0 n1), compared as exact fractions.
        long long s_total = 0;
        for (double v : image) s_total += static_cast<long long>(v);
        const long long n_total = static_cast<long long>(image.size());
        long long n0 = 0, s0 = 0;
        unsigned __int128 best_num = 0, best_den = 1;
        for (int k = 0; k + 1 < kHistogramBins; ++k) {
            n0 += static_cast<long long>(st.count[static_cast<std::size_t>(k)]);
            s0 += static_cast<long long>(st.sum[static_cast<std::size_t>(k)]);
            const long long n1 = n_total - n0;
            if (n0 == 0 || n1 == 0) continue;
            const long long s1 = s_total - s0;
            __int128 num = static_cast<__int128>(s0) * s0 * n1 + static_cast<__int128>(s1) * s1 * n0;
            __int128 den = static_cast<__int128>(n0) * n1;
            auto unum = static_cast<unsigned __int128>(num);
            auto uden = static_cast<unsigned __int128>(den);
            if (best < 0 || fraction_greater(unum, uden, best_num, best_den)) {
                best = k;
                best_num = unum;
                best_den = uden;
            }
        }
    } else {
        double n0 = 0.0, s0 = 0.0, best_score = 0.0;
        for (int k = 0; k + 1 < kHistogramBins; ++k) {
            n0 += st.count[static_cast<std::size_t>(k)];
            s0 += st.sum[static_cast<std::size_t>(k)];
            const double n1 = n - n0;
            if (n0 == 0.0 || n1 == 0.0) continue;
            const double s1 = total - s0;
            const double score = s0 * s0 / n0 + s1 * s1 / n1;
            if (best < 0 || score > best_score) {
                best = k;
                best_score = score;
            }
        }
    }
    if (best < 0) throw Error("no threshold exists");
    return best;
}

double otsu_threshold(const RealGrid& image) {
    const int k = otsu_bin(image);
    auto [lo_it, hi_it] = std::minmax_element(image.begin(), image.end());
    double th = *lo_it;
    for (double v : image)
        if (histogram_bin(v, *lo_it, *hi_it) <= k) th = std::max(th, v);
    return th;
}

Mask binarize(const RealGrid& image, double threshold) {
    Mask out(image.rows(), image.cols());
    std::transform(image.begin(), image.end(), out.begin(),
                   [&](double v) { return static_cast<unsigned char>(v > threshold); });
    return out;
}

// ---------------------------------------------------------------------------
// Components, contours, measurements

namespace {

constexpr std::array<PixelIndex, 8> kMoore{{
    {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1},
}};

int moore_direction(long dr, long dc) {
    for (int d = 0; d < 8; ++d)
        if (kMoore[static_cast<std::size_t>(d)].row == dr && kMoore[static_cast<std::size_t>(d)].col == dc) return d;
    return 0;
}

bool at(const Mask& m, long r, long c) {
    return m.contains(r, c) && m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) != 0;
}

// Marks non-mask pixels 4-connected to the outside of the grid; everything
// else (mask plus enclosed holes) becomes the filled mask.
Mask fill_from_outside(const Mask& walls) {
    const long rows = static_cast<long>(walls.rows()), cols = static_cast<long>(walls.cols());
    Mask outside(walls.rows(), walls.cols());
    std::deque<PixelIndex> queue;
    auto seed = [&](long r, long c) {
        if (!at(walls, r, c) && !outside(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) {
            outside(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1;
            queue.push_back({r, c});
        }
    };
    for (long r = 0; r < rows; ++r) {
        seed(r, 0);
        seed(r, cols - 1);
    }
    for (long c = 0; c < cols; ++c) {
        seed(0, c);
        seed(rows - 1, c);
    }
    constexpr std::array<PixelIndex, 4> four{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    while (!queue.empty()) {
        auto p = queue.front();
        queue.pop_front();
        for (auto d : four) {
            long r = p.row + d.row, c = p.col + d.col;
            if (walls.contains(r, c)) seed(r, c);
        }
    }
    Mask filled(walls.rows(), walls.cols());
    for (std::size_t i = 0; i < filled.size(); ++i) filled.data()[i] = outside.data()[i] ? 0 : 1;
    return filled;
}

}  // namespace

std::vector<PixelIndex> trace_contour(const Mask& mask) {
    PixelIndex start{-1, -1};
    for (std::size_t r = 0; r < mask.rows() && start.row < 0; ++r)
        for (std::size_t c = 0; c < mask.cols(); ++c)
            if (mask(r, c)) {
                start = {static_cast<long>(r), static_cast<long>(c)};
                break;
            }
    if (start.row < 0) return {};

    std::vector<PixelIndex> contour{start};
    PixelIndex cur = start;
    int back = 0;  // direction from cur to the last background pixel examined (west of start)
    bool moved = false;
    const std::size_t limit = 4 * mask.size() + 8;
    for (std::size_t step = 0; step < limit; ++step) {
        int found = -1;
        for (int k = 1; k <= 8; ++k) {
            int d = (back + k) % 8;
            auto off = kMoore[static_cast<std::size_t>(d)];
            if (at(mask, cur.row + off.row, cur.col + off.col)) {
                found = d;
                break;
            }
        }
        if (found < 0) break;  // isolated pixel
        auto off = kMoore[static_cast<std::size_t>(found)];
        PixelIndex next{cur.row + off.row, cur.col + off.col};
        if (moved && cur == start) {
            if (next == contour[1]) break;  // leaving start the same way again: closed
            contour.push_back(start);
        }
        auto bg_off = kMoore[static_cast<std::size_t>((found + 7) % 8)];
        PixelIndex bg{cur.row + bg_off.row, cur.col + bg_off.col};
        cur = next;
        back = moore_direction(bg.row - cur.row, bg.col - cur.col);
        moved = true;
        if (!(cur == start)) contour.push_back(cur);
    }
    return contour;
}

Mask rasterize_contour(const std::vector<PixelIndex>& contour, std::size_t rows, std::size_t cols) {
    Mask walls(rows, cols);
    for (auto p : contour)
        if (walls.contains(p.row, p.col)) walls(static_cast<std::size_t>(p.row), static_cast<std::size_t>(p.col)) = 1;
    return fill_from_outside(walls);
}

std::vector<geom::Point> contour_points_mm(const LesionROI& roi) {
    std::vector<geom::Point> pts;
    pts.reserve(roi.contour.size());
    for (auto p : roi.contour)
        pts.push_back({static_cast<double>(p.col) * roi.spacing.lateral_mm,
                       static_cast<double>(p.row) * roi.spacing.axial_mm});
    return pts;
}

LesionROI measure_roi(Mask mask, PixelSpacing spacing, int label) {
    LesionROI roi;
    roi.spacing = spacing;
    roi.label = label;
    roi.contour = trace_contour(mask);
    require(!roi.contour.empty(), "empty ROI mask");

    long rmin = static_cast<long>(mask.rows()), rmax = -1, cmin = static_cast<long>(mask.cols()), cmax = -1;
    double sx = 0.0, sy = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < mask.rows(); ++r)
        for (std::size_t c = 0; c < mask.cols(); ++c)
            if (mask(r, c)) {
                ++count;
                sx += static_cast<double>(c);
                sy += static_cast<double>(r);
                rmin = std::min(rmin, static_cast<long>(r));
                rmax = std::max(rmax, static_cast<long>(r));
                cmin = std::min(cmin, static_cast<long>(c));
                cmax = std::max(cmax, static_cast<long>(c));
            }
    const double dx = spacing.lateral_mm, dy = spacing.axial_mm;
    roi.pixel_count = count;
    roi.area_mm2 = static_cast<double>(count) * dx * dy;
    roi.width_mm = static_cast<double>(cmax - cmin + 1) * dx;
    roi.depth_mm = static_cast<double>(rmax - rmin + 1) * dy;
    roi.centroid_mm = {sx / static_cast<double>(count) * dx, sy / static_cast<double>(count) * dy};

    // Feret diameter over the pixel squares: corners of boundary pixels.
    std::vector<geom::Point> corners;
    corners.reserve(roi.contour.size() * 4);
    for (auto p : roi.contour) {
        const double x = static_cast<double>(p.col) * dx, y = static_cast<double>(p.row) * dy;
        for (double ox : {-0.5, 0.5})
            for (double oy : {-0.5, 0.5}) corners.push_back({x + ox * dx, y + oy * dy});
    }
    roi.max_diameter_mm = geom::max_feret(corners);

    // Perimeter: Douglas-Peucker polygon of the pixel-center contour (one
    // pixel pitch tolerance), never shorter than the contour's convex hull.
    // Worked in pitch units from the first contour pixel so that translation
    // and uniform rescaling cannot flip tolerance ties.
    const double pitch = std::max(dx, dy);
    const double ux = dx / pitch, uy = dy / pitch;
    std::vector<geom::Point> pts;
    pts.reserve(roi.contour.size());
    const PixelIndex origin = roi.contour.front();
    for (auto p : roi.contour)
        pts.push_back({static_cast<double>(p.col - origin.col) * ux, static_cast<double>(p.row - origin.row) * uy});
    auto simplified = geom::simplify_closed(pts, 1.0);
    const double hull_perimeter = geom::polygon_perimeter(geom::convex_hull(pts));
    roi.perimeter_mm = std::max(geom::polygon_perimeter(simplified), hull_perimeter) * pitch;

    roi.mask = std::move(mask);
    return roi;
}

std::vector<LesionROI> extract_rois(const Mask& binary, const SegmentationParams& params, PixelSpacing spacing) {
    params.validate();
    const long rows = static_cast<long>(binary.rows()), cols = static_cast<long>(binary.cols());
    Grid<int> labels(binary.rows(), binary.cols(), 0);
    std::vector<std::vector<PixelIndex>> components;
    std::vector<PixelIndex> stack;
    for (long r = 0; r < rows; ++r) {
        for (long c = 0; c < cols; ++c) {
            if (!at(binary, r, c) || labels(static_cast<std::size_t>(r), static_cast<std::size_t>(c))) continue;
            const int id = static_cast<int>(components.size()) + 1;
            components.emplace_back();
            stack.assign(1, {r, c});
            labels(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = id;
            while (!stack.empty()) {
                auto p = stack.back();
                stack.pop_back();
                components.back().push_back(p);
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        if ((dr == 0 && dc == 0) || (params.connectivity == 4 && dr != 0 && dc != 0)) continue;
                        long rr = p.row + dr, cc = p.col + dc;
                        if (at(binary, rr, cc) && !labels(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc))) {
                            labels(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) = id;
                            stack.push_back({rr, cc});
                        }
                    }
            }
        }
    }

    struct Candidate {
        std::size_t order;
        LesionROI roi;
    };
    std::vector<Candidate> kept;
    const double pixel_area = spacing.lateral_mm * spacing.axial_mm;
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& comp = components[k];
        long rmin = rows, rmax = -1, cmin = cols, cmax = -1;
        for (auto p : comp) {
            rmin = std::min(rmin, p.row);
            rmax = std::max(rmax, p.row);
            cmin = std::min(cmin, p.col);
            cmax = std::max(cmax, p.col);
        }
        // Fill holes inside a padded bounding box.
        const long br = rmax - rmin + 3, bc = cmax - cmin + 3;
        Mask local(static_cast<std::size_t>(br), static_cast<std::size_t>(bc));
        for (auto p : comp) local(static_cast<std::size_t>(p.row - rmin + 1), static_cast<std::size_t>(p.col - cmin + 1)) = 1;
        Mask filled = fill_from_outside(local);
        std::size_t count = static_cast<std::size_t>(std::count(filled.begin(), filled.end(), 1));
        if (static_cast<double>(count) * pixel_area < params.min_region_area_mm2) continue;
        Mask full(binary.rows(), binary.cols());
        for (long r = 1; r + 1 < br; ++r)
            for (long c = 1; c + 1 < bc; ++c)
                if (filled(static_cast<std::size_t>(r), static_cast<std::size_t>(c)))
                    full(static_cast<std::size_t>(r + rmin - 1), static_cast<std::size_t>(c + cmin - 1)) = 1;
        kept.push_back({k, measure_roi(std::move(full), spacing)});
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
        if (a.roi.pixel_count != b.roi.pixel_count) return a.roi.pixel_count > b.roi.pixel_count;
        return a.order < b.order;
    });
    std::vector<LesionROI> out;
    out.reserve(kept.size());
    for (auto& c : kept) {
        c.roi.label = static_cast<int>(out.size());
        out.push_back(std::move(c.roi));
    }
    return out;
}

SegmentationResult segment(const RealGrid& image, const SegmentationParams& params, PixelSpacing spacing) {
    params.validate();
    SegmentationResult res;
    res.threshold_used = params.threshold_override ? *params.threshold_override : otsu_threshold(image);
    Mask bright = binarize(image, res.threshold_used);

    Polarity pol = params.polarity;
    if (pol == Polarity::automatic) {
        double sum_b = 0.0, sum_d = 0.0, n_b = 0.0, n_d = 0.0;
        for (std::size_t i = 0; i < image.size(); ++i) {
            if (bright.data()[i]) {
                sum_b += image.data()[i];
                n_b += 1.0;
            } else {
                sum_d += image.data()[i];
                n_d += 1.0;
            }
        }
        const double mean = (sum_b + sum_d) / (n_b + n_d);
        const double dev_b = n_b > 0 ? std::abs(sum_b / n_b - mean) : 0.0;
        const double dev_d = n_d > 0 ? std::abs(sum_d / n_d - mean) : 0.0;
        // An empty class is the minority: the threshold isolates nothing.
        if (n_b == 0.0)
            pol = Polarity::bright;
        else if (n_d == 0.0)
            pol = Polarity::dark;
        else
            pol = dev_b > dev_d ? Polarity::bright : Polarity::dark;
    }
    res.polarity = pol;
    res.lesion_class = bright;
    if (pol == Polarity::dark)
        for (auto& v : res.lesion_class) v = v ? 0 : 1;
    res.rois = extract_rois(res.lesion_class, params, spacing);
    return res;
}

// ---------------------------------------------------------------------------
// Selection and accuracy

RoiSelector parse_roi_selector(const std::string& text) {
    if (text == "largest") return LargestRoi{};
    auto number = [&](std::string_view s) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("bad ROI selector: " + text);
        return v;
    };
    if (text.rfind("index:", 0) == 0) {
        double k = number(std::string_view(text).substr(6));
        require(k >= 0 && k == std::floor(k), "bad ROI selector: " + text);
        return RoiIndex{static_cast<std::size_t>(k)};
    }
    if (text.rfind("point:", 0) == 0) {
        std::string_view rest = std::string_view(text).substr(6);
        auto comma = rest.find(',');
        require(comma != std::string_view::npos, "bad ROI selector: " + text);
        return RoiAtPoint{number(rest.substr(0, comma)), number(rest.substr(comma + 1))};
    }
    throw Error("bad ROI selector: " + text);
}

const LesionROI& select_roi(const std::vector<LesionROI>& rois, const RoiSelector& selector) {
    require(!rois.empty(), "no ROI found");
    if (const auto* idx = std::get_if<RoiIndex>(&selector)) {
        require(idx->index < rois.size(), "ROI index out of range");
        return rois[idx->index];
    }
    if (std::holds_alternative<LargestRoi>(selector)) {
        return *std::max_element(rois.begin(), rois.end(), [](const LesionROI& a, const LesionROI& b) {
            return a.area_mm2 < b.area_mm2;
        });
    }
    const auto& pt = std::get<RoiAtPoint>(selector);
    for (const auto& roi : rois) {
        long r = std::lround(pt.depth_mm / roi.spacing.axial_mm);
        long c = std::lround(pt.lateral_mm / roi.spacing.lateral_mm);
        if (at(roi.mask, r, c)) return roi;
    }
    throw Error("no ROI at point");
}

DimensionError dimension_error(const LesionROI& roi, double reference_mm, Dimension which) {
    require(reference_mm > 0.0, "reference dimension must be positive");
    double measured = which == Dimension::width ? roi.width_mm
                      : which == Dimension::depth ? roi.depth_mm
                                                  : roi.max_diameter_mm;
    DimensionError e;
    e.absolute_mm = std::abs(measured - reference_mm);
    e.percent = 100.0 * e.absolute_mm / reference_mm;
    return e;
}

}  // namespace sonoseg
