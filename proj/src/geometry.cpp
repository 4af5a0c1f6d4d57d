#include "sonoseg/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace sonoseg::geom {

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double segment_distance(const Point& p, const Point& a, const Point& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) return distance(p, a);
    double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    return distance(p, {a.x + t * dx, a.y + t * dy});
}

void douglas_peucker(std::span<const Point> pts, std::size_t first, std::size_t last, double tol,
                     std::vector<char>& keep) {
    if (last <= first + 1) return;
    double worst = -1.0;
    std::size_t at = first;
    for (std::size_t i = first + 1; i < last; ++i) {
        double d = segment_distance(pts[i], pts[first], pts[last]);
        if (d > worst) {
            worst = d;
            at = i;
        }
    }
    if (worst > tol) {
        keep[at] = 1;
        douglas_peucker(pts, first, at, tol, keep);
        douglas_peucker(pts, at, last, tol, keep);
    }
}

}  // namespace

std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

double polygon_area(std::span<const Point> poly) {
    double a = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return std::abs(a) / 2.0;
}

double polygon_perimeter(std::span<const Point> poly) {
    if (poly.size() < 2) return 0.0;
    double p = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) p += distance(poly[i], poly[(i + 1) % n]);
    return p;
}

double max_feret(std::span<const Point> pts) {
    auto hull = convex_hull({pts.begin(), pts.end()});
    double best = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i)
        for (std::size_t j = i + 1; j < hull.size(); ++j) best = std::max(best, distance(hull[i], hull[j]));
    return best;
}

std::vector<Point> simplify_closed(std::span<const Point> poly, double tolerance) {
    const std::size_t n = poly.size();
    if (n < 4) return {poly.begin(), poly.end()};
    // Split the ring at vertex 0 and the vertex farthest from it.
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        double d = distance(poly[0], poly[i]);
        if (d > far_d) {
            far_d = d;
            far = i;
        }
    }
    std::vector<Point> ring(poly.begin(), poly.end());
    ring.push_back(poly[0]);
    std::vector<char> keep(ring.size(), 0);
    keep[0] = keep[far] = keep[n] = 1;
    douglas_peucker(ring, 0, far, tolerance, keep);
    douglas_peucker(ring, far, n, tolerance, keep);
    std::vector<Point> out;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) out.push_back(ring[i]);
    return out;
}

bool contains(std::span<const Point> poly, const Point& p) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
}

}  // namespace sonoseg::geom
