#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sonoseg/features.hpp"

namespace sonoseg {

struct FeatureWeight {
    double weight = 0.0;
    int orientation = 1;  // +1 higher is malignant, -1 lower is malignant
    double mean = 0.0;    // reference normalization
    double sd = 1.0;
};

struct WeightProfile {
    std::string name;
    std::map<std::string, FeatureWeight> features;

    void validate() const;
};

// "spectral", "morphometric", "combined".
const std::vector<std::string>& builtin_profile_names();
WeightProfile builtin_profile(const std::string& name);

WeightProfile parse_profile(const std::string& json_text);
std::string profile_to_json(const WeightProfile& profile);
WeightProfile load_profile(const std::filesystem::path& path);

// "spectral" | "morphometric" | "combined" | "file:<path>".
WeightProfile resolve_profile(const std::string& spec);

// sum w * orientation * (x - mean) / sd over the weighted features.
double score(const std::map<std::string, double>& values, const WeightProfile& profile);
double score(const FeatureVector& features, const WeightProfile& profile);

// Reference statistics replaced by the cohort's mean and population SD.
WeightProfile refit_normalization(const WeightProfile& profile,
                                  std::span<const std::map<std::string, double>> cohort);

struct LabeledScore {
    double score = 0.0;
    bool malignant = false;
};

struct RocPoint {
    double threshold = std::numeric_limits<double>::infinity();  // malignant iff score >= threshold
    double fpr = 0.0;
    double tpr = 0.0;
};

struct CohortResult {
    double sensitivity = 0.0;  // fractions in [0, 1]
    double specificity = 0.0;
    double auc = 0.0;
    double operating_threshold = 0.0;
    std::vector<RocPoint> roc;  // from (0,0) to (1,1)
};

// Sweep over every distinct score, trapezoid AUC, Youden-optimal operating
// point with ties resolved toward higher specificity.
CohortResult roc(std::span<const LabeledScore> scores);

// Sensitivity and specificity at a fixed threshold.
CohortResult evaluate_at(std::span<const LabeledScore> scores, double threshold);

inline constexpr double kDefaultDecisionThreshold = 0.0;

inline bool is_malignant(double score, double threshold = kDefaultDecisionThreshold) { return score >= threshold; }

std::string roc_csv(const CohortResult& result);

}  // namespace sonoseg
