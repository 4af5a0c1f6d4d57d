#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sonoseg/geometry.hpp"
#include "sonoseg/grid.hpp"

namespace sonoseg {

struct PixelIndex {
    long row = 0;
    long col = 0;
    bool operator==(const PixelIndex&) const = default;
};

enum class Polarity { automatic, bright, dark };

std::string to_string(Polarity p);

struct SegmentationParams {
    std::optional<double> threshold_override;
    double min_region_area_mm2 = 4.0;
    int connectivity = 8;
    Polarity polarity = Polarity::automatic;

    void validate() const;
};

struct LesionROI {
    Mask mask;                         // full-frame, one connected component, holes filled
    std::vector<PixelIndex> contour;   // Moore-traced outer boundary, closed implicitly
    PixelSpacing spacing;
    double area_mm2 = 0.0;
    double perimeter_mm = 0.0;
    double width_mm = 0.0;             // lateral extent
    double depth_mm = 0.0;             // axial extent
    double max_diameter_mm = 0.0;      // Feret diameter of the pixel union
    geom::Point centroid_mm;           // x lateral, y depth
    int label = 0;                     // rank in the area-sorted list
    std::size_t pixel_count = 0;
};

// Otsu's threshold on 256 uniform bins spanning [min, max]. The returned
// value is the largest pixel value in the lower class, so `v > threshold`
// reproduces the optimal split exactly. Throws on constant images.
double otsu_threshold(const RealGrid& image);

// Index of the optimal split bin (class 0 = bins <= k).
int otsu_bin(const RealGrid& image);

Mask binarize(const RealGrid& image, double threshold);

struct SegmentationResult {
    double threshold_used = 0.0;
    Polarity polarity = Polarity::dark;  // resolved, never automatic
    Mask lesion_class;
    std::vector<LesionROI> rois;
};

// Threshold (override or Otsu), resolve polarity, extract ROIs.
// Automatic polarity takes the class whose mean lies farther from the
// image mean, i.e. the minority class.
SegmentationResult segment(const RealGrid& image, const SegmentationParams& params, PixelSpacing spacing);

// Connected components with holes filled, area-filtered, sorted by area
// descending (ties by raster order of the first pixel).
std::vector<LesionROI> extract_rois(const Mask& binary, const SegmentationParams& params, PixelSpacing spacing);

// Builds a single ROI from a mask (assumed one connected component).
LesionROI measure_roi(Mask mask, PixelSpacing spacing, int label = 0);

std::vector<PixelIndex> trace_contour(const Mask& mask);

// Pixel-center contour in mm (x lateral, y depth).
std::vector<geom::Point> contour_points_mm(const LesionROI& roi);

// Re-rasterizes the contour and fills everything it encloses.
Mask rasterize_contour(const std::vector<PixelIndex>& contour, std::size_t rows, std::size_t cols);

struct RoiIndex {
    std::size_t index;
};
struct LargestRoi {};
struct RoiAtPoint {
    double lateral_mm;
    double depth_mm;
};
using RoiSelector = std::variant<RoiIndex, LargestRoi, RoiAtPoint>;

// Parses "largest", "index:<k>" or "point:<x>,<y>" (mm).
RoiSelector parse_roi_selector(const std::string& text);

const LesionROI& select_roi(const std::vector<LesionROI>& rois, const RoiSelector& selector);

enum class Dimension { width, depth, max_diameter };

struct DimensionError {
    double absolute_mm = 0.0;
    double percent = 0.0;
};

DimensionError dimension_error(const LesionROI& roi, double reference_mm, Dimension which = Dimension::width);

}  // namespace sonoseg
