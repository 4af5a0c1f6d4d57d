#pragma once

#include <span>
#include <vector>

namespace sonoseg::geom {

struct Point {
    double x = 0.0;  // lateral
    double y = 0.0;  // axial
    bool operator==(const Point&) const = default;
};

double distance(const Point& a, const Point& b);

// Andrew's monotone chain; counter-clockwise, no repeated first vertex,
// collinear points dropped.
std::vector<Point> convex_hull(std::vector<Point> pts);

double polygon_area(std::span<const Point> poly);       // absolute shoelace area
double polygon_perimeter(std::span<const Point> poly);  // closed

// Maximum pairwise distance among the points (Feret diameter of their hull).
double max_feret(std::span<const Point> pts);

// Douglas-Peucker simplification of a closed polygon.
std::vector<Point> simplify_closed(std::span<const Point> poly, double tolerance);

// Even-odd point-in-polygon test.
bool contains(std::span<const Point> poly, const Point& p);

}  // namespace sonoseg::geom
