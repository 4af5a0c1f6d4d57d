#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sonoseg/classify.hpp"
#include "sonoseg/pipeline.hpp"

namespace sonoseg {

nlohmann::json roi_json(const LesionROI& roi, bool with_contour = false);

// {name: value | null} over feature_names().
nlohmann::json features_json(const FeatureVector& features);

// features, missing_features, autocorrelation, profile, score, decision.
nlohmann::json analysis_json(const RoiAnalysis& analysis);

nlohmann::json segmentation_json(const SegmentationResult& seg, bool with_contours = true);

// frame_id, threshold_used, polarity, roi_count, selected_roi, features, score, decision.
nlohmann::json frame_json(const FrameResult& result);

nlohmann::json cohort_json(const CohortResult& result);

nlohmann::json profile_json(const WeightProfile& profile);

std::string features_csv_header();
std::string features_csv_row(const FrameResult& result);

}  // namespace sonoseg
