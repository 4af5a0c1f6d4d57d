#include "sonoseg/report.hpp"

#include <cmath>
#include <sstream>

namespace sonoseg {

using nlohmann::json;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json roi_json(const LesionROI& roi, bool with_contour) {
    json j = {{"label", roi.label},
              {"area_mm2", roi.area_mm2},
              {"perimeter_mm", roi.perimeter_mm},
              {"width_mm", roi.width_mm},
              {"depth_mm", roi.depth_mm},
              {"max_diameter_mm", roi.max_diameter_mm},
              {"centroid_mm", {roi.centroid_mm.x, roi.centroid_mm.y}},
              {"pixel_count", roi.pixel_count}};
    if (with_contour) {
        json c = json::array();
        for (auto p : roi.contour) c.push_back({p.col, p.row});
        j["contour"] = std::move(c);  // [column, row] pairs
    }
    return j;
}

json features_json(const FeatureVector& fv) {
    json j = json::object();
    for (const auto& name : feature_names()) {
        auto v = fv.get(name);
        j[name] = v ? number_or_null(*v) : json(nullptr);
    }
    return j;
}

json analysis_json(const RoiAnalysis& a) {
    json j;
    j["features"] = features_json(a.features);
    j["missing_features"] = a.features.missing;
    json ac = json::array();
    for (std::size_t r = 0; r < a.features.autocorrelation.rows(); ++r) {
        json row = json::array();
        for (double v : a.features.autocorrelation.row(r)) row.push_back(number_or_null(v));
        ac.push_back(std::move(row));
    }
    j["autocorrelation"] = std::move(ac);
    j["spectral_cells"] = a.features.spectral_cells;
    j["profile"] = a.profile;
    j["score"] = a.score ? number_or_null(*a.score) : json(nullptr);
    j["decision"] = a.score ? json(a.malignant ? "malignant" : "benign") : json(nullptr);
    if (a.score_error) j["score_error"] = *a.score_error;
    return j;
}

json segmentation_json(const SegmentationResult& seg, bool with_contours) {
    json rois = json::array();
    for (const auto& r : seg.rois) rois.push_back(roi_json(r, with_contours));
    return {{"threshold_used", seg.threshold_used},
            {"polarity", to_string(seg.polarity)},
            {"roi_count", seg.rois.size()},
            {"rois", std::move(rois)}};
}

json frame_json(const FrameResult& r) {
    json j;
    j["frame_id"] = r.frame_id;
    j["status"] = r.error ? "error" : "ok";
    if (r.error) j["error"] = *r.error;
    j["threshold_used"] = r.threshold_used;
    j["polarity"] = to_string(r.polarity);
    j["roi_count"] = r.roi_count;
    j["selected_roi"] = r.selected ? roi_json(*r.selected) : json(nullptr);
    if (r.analysis) {
        const json a = analysis_json(*r.analysis);
        for (const auto& [k, v] : a.items()) j[k] = v;
    } else {
        j["features"] = nullptr;
        j["score"] = nullptr;
        j["decision"] = nullptr;
    }
    return j;
}

json cohort_json(const CohortResult& c) {
    return {{"sensitivity", c.sensitivity},
            {"specificity", c.specificity},
            {"auc", c.auc},
            {"operating_threshold", number_or_null(c.operating_threshold)}};
}

json profile_json(const WeightProfile& p) { return json::parse(profile_to_json(p)); }

std::string features_csv_header() {
    std::string h = "frame_id,status,roi_label,area_mm2,width_mm,depth_mm";
    for (const auto& n : feature_names()) h += "," + n;
    return h + ",score,decision\n";
}

std::string features_csv_row(const FrameResult& r) {
    std::ostringstream out;
    out.precision(17);
    out << r.frame_id << ',' << (r.error ? "error" : "ok") << ',';
    if (r.selected)
        out << r.selected->label << ',' << r.selected->area_mm2 << ',' << r.selected->width_mm << ',' << r.selected->depth_mm;
    else
        out << ",,,";
    for (const auto& n : feature_names()) {
        out << ',';
        if (r.analysis)
            if (auto v = r.analysis->features.get(n); v && std::isfinite(*v)) out << *v;
    }
    out << ',';
    if (r.analysis && r.analysis->score) out << *r.analysis->score;
    out << ',';
    if (r.analysis && r.analysis->score) out << (r.analysis->malignant ? "malignant" : "benign");
    out << '\n';
    return out.str();
}

}  // namespace sonoseg
