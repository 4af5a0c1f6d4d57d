#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sonoseg/frame_io.hpp"
#include "sonoseg/geometry.hpp"
#include "sonoseg/grid.hpp"
#include "sonoseg/segmentation.hpp"
#include "sonoseg/spectral.hpp"

namespace sonoseg {

// Scalar feature names in their fixed serialization order.
const std::vector<std::string>& feature_names();

struct FeatureVector {
    std::map<std::string, double> values;        // present features
    std::map<std::string, std::string> missing;  // name -> reason
    RealGrid autocorrelation;                    // gamma(dm, dn), diagnostic only
    std::size_t spectral_cells = 0;              // parameter cells inside the lesion
    std::size_t contour_cells = 0;               // parameter cells on the contour
    std::size_t pixels = 0;

    bool has(const std::string& name) const { return values.count(name) != 0; }
    double at(const std::string& name) const;
    std::optional<double> get(const std::string& name) const;
};

struct RoiGeometry {
    std::vector<geom::Point> convex_hull;  // mm, pixel-corner hull
    double convex_perimeter_mm = 0.0;
    double convex_area_mm2 = 0.0;          // pixels of the filled hull of pixel centres
    double max_diameter_mm = 0.0;
};

RoiGeometry roi_geometry(const LesionROI& roi);

struct Morphometrics {
    double aspect_ratio = 0.0;
    double compactness = 0.0;      // circle = 1
    double compactness_raw = 0.0;  // sqrt(area) / max diameter
    double roundness = 0.0;        // circle = 1
    double roundness_raw = 0.0;    // area / max diameter^2
    double convexity = 0.0;
    double solidity = 0.0;
    double form_factor = 0.0;
};

Morphometrics morphometrics(const LesionROI& roi);

// Parameter cells whose window center falls inside the ROI mask.
Mask cell_mask(const ParameterImage& param, const LesionROI& roi);

// Parameter cells hit by the ROI contour.
std::vector<std::pair<std::size_t, std::size_t>> contour_cells(const ParameterImage& param, const LesionROI& roi);

double echogenicity(const ParameterImage& param, const LesionROI& roi);
double heterogeneity(const ParameterImage& param, const LesionROI& roi);

// FP1 / mu: FP1 is the mean over interior mask pixels of the mean absolute
// difference to the four neighbours, mu the mean intensity over the mask.
double fnpa(const RealGrid& image, const Mask& mask);

// gamma(dm, dn) for dm, dn in [0, max_lag], over the mask's bounding box.
RealGrid autocorrelation(const RealGrid& image, const Mask& mask, std::size_t max_lag);

// Haralick contrast on `levels` gray levels, offsets (0,1) and (1,0)
// averaged. The quantization range defaults to the region's [min, max].
double cooccurrence_contrast(const RealGrid& image, const Mask& mask, int levels = 64,
                             std::optional<std::pair<double, double>> range = std::nullopt);

// Variogram slope of mean absolute increments over lags 1..max_lag,
// horizontal and vertical averaged, clamped to [0, 1].
double hurst(const RealGrid& image, const Mask& mask, std::size_t max_lag = 8);

// sum |grad M| / sum |M| over contour cells; central differences in cell units.
double margin_definition(const ParameterImage& param, const LesionROI& roi);

struct FeatureConfig {
    std::size_t autocorrelation_max_lag = 2;
    std::size_t hurst_max_lag = 8;
    int cooccurrence_levels = 64;
};

// Every feature is attempted independently; failures land in `missing`.
FeatureVector extract_features(const BModeImage& bmode, const ParameterImage& param, const LesionROI& roi,
                               const FeatureConfig& config = {});

}  // namespace sonoseg
