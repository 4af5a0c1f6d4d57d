#include "sonoseg/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sonoseg/error.hpp"

namespace sonoseg {

using nlohmann::json;

void WeightProfile::validate() const {
    require(!features.empty(), "profile has no weighted features");
    double total = 0.0;
    for (const auto& [name, fw] : features) {
        require(fw.weight >= 0.0, "negative weight for " + name);
        require(fw.orientation == 1 || fw.orientation == -1, "orientation must be +1 or -1 for " + name);
        require(fw.sd > 0.0 && std::isfinite(fw.sd), "zero sd in normalization for " + name);
        total += fw.weight;
    }
    require(std::abs(total - 1.0) <= 1e-9, "profile weights must sum to 1");
}

namespace {

struct TableStat {
    double benign_mean, benign_sd, malignant_mean, malignant_sd;
};

// Benign and malignant reference statistics of the scored features.
const std::map<std::string, TableStat>& reference_stats() {
    static const std::map<std::string, TableStat> stats = {
        {"echogenicity", {3.1884, 8.2389, -2.8200, 9.6313}},
        {"heterogeneity", {7.3728, 2.3343, 8.9937, 2.8422}},
        {"margin_definition", {0.1546, 0.0672, 0.1470, 0.0692}},
        {"aspect_ratio", {0.6945, 0.2225, 0.9883, 0.3997}},
        {"convexity", {0.8303, 0.0325, 0.8180, 0.0346}},
    };
    return stats;
}

FeatureWeight reference_weight(const std::string& feature, double weight) {
    const auto& s = reference_stats().at(feature);
    FeatureWeight fw;
    fw.weight = weight;
    fw.orientation = s.malignant_mean > s.benign_mean ? 1 : -1;
    fw.mean = 0.5 * (s.benign_mean + s.malignant_mean);
    fw.sd = std::sqrt(0.5 * (s.benign_sd * s.benign_sd + s.malignant_sd * s.malignant_sd));
    return fw;
}

WeightProfile make_profile(const std::string& name, std::initializer_list<std::pair<const char*, double>> weights) {
    WeightProfile p;
    p.name = name;
    for (auto [feature, w] : weights) p.features[feature] = reference_weight(feature, w);
    return p;
}

}  // namespace

const std::vector<std::string>& builtin_profile_names() {
    static const std::vector<std::string> names = {"spectral", "morphometric", "combined"};
    return names;
}

WeightProfile builtin_profile(const std::string& name) {
    if (name == "spectral")
        return make_profile(name, {{"echogenicity", 0.5}, {"heterogeneity", 0.25}, {"margin_definition", 0.25}});
    if (name == "morphometric") return make_profile(name, {{"aspect_ratio", 0.5}, {"convexity", 0.5}});
    if (name == "combined")
        return make_profile(name, {{"echogenicity", 0.14},
                                   {"heterogeneity", 0.14},
                                   {"margin_definition", 0.07},
                                   {"aspect_ratio", 0.36},
                                   {"convexity", 0.29}});
    throw Error("unknown profile: " + name);
}

WeightProfile parse_profile(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("malformed profile: ") + e.what());
    }
    WeightProfile p;
    try {
        p.name = j.value("name", "custom");
        for (const auto& [feature, f] : j.at("features").items()) {
            FeatureWeight fw;
            fw.weight = f.at("weight").get<double>();
            fw.orientation = f.at("orientation").get<int>();
            fw.mean = f.at("mean").get<double>();
            fw.sd = f.at("sd").get<double>();
            p.features[feature] = fw;
        }
    } catch (const json::exception& e) {
        throw Error(std::string("malformed profile: ") + e.what());
    }
    p.validate();
    return p;
}

std::string profile_to_json(const WeightProfile& p) {
    json j;
    j["name"] = p.name;
    j["features"] = json::object();
    for (const auto& [feature, fw] : p.features)
        j["features"][feature] = {{"weight", fw.weight}, {"orientation", fw.orientation}, {"mean", fw.mean}, {"sd", fw.sd}};
    return j.dump(2);
}

WeightProfile load_profile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open profile: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_profile(ss.str());
}

WeightProfile resolve_profile(const std::string& spec) {
    if (spec.rfind("file:", 0) == 0) return load_profile(spec.substr(5));
    return builtin_profile(spec);
}

double score(const std::map<std::string, double>& values, const WeightProfile& profile) {
    profile.validate();
    double s = 0.0;
    for (const auto& [feature, fw] : profile.features) {
        auto it = values.find(feature);
        if (it == values.end()) throw Error("missing weighted feature: " + feature);
        s += fw.weight * fw.orientation * (it->second - fw.mean) / fw.sd;
    }
    return s;
}

double score(const FeatureVector& features, const WeightProfile& profile) { return score(features.values, profile); }

WeightProfile refit_normalization(const WeightProfile& profile, std::span<const std::map<std::string, double>> cohort) {
    require(!cohort.empty(), "empty cohort");
    WeightProfile out = profile;
    for (auto& [feature, fw] : out.features) {
        double sum = 0.0;
        for (const auto& row : cohort) {
            auto it = row.find(feature);
            if (it == row.end()) throw Error("missing weighted feature: " + feature);
            sum += it->second;
        }
        const double mean = sum / static_cast<double>(cohort.size());
        double ss = 0.0;
        for (const auto& row : cohort) ss += (row.at(feature) - mean) * (row.at(feature) - mean);
        fw.mean = mean;
        fw.sd = std::sqrt(ss / static_cast<double>(cohort.size()));
        if (!(fw.sd > 0.0)) throw Error("zero sd in normalization for " + feature);
    }
    return out;
}

namespace {

std::pair<double, double> class_counts(std::span<const LabeledScore> scores) {
    double pos = 0.0, neg = 0.0;
    for (const auto& s : scores) (s.malignant ? pos : neg) += 1.0;
    if (pos == 0.0 || neg == 0.0) throw Error("single-class input");
    return {pos, neg};
}

}  // namespace

CohortResult roc(std::span<const LabeledScore> scores) {
    const auto [pos, neg] = class_counts(scores);
    std::vector<LabeledScore> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end(), [](const LabeledScore& a, const LabeledScore& b) { return a.score > b.score; });

    CohortResult res;
    res.roc.push_back({});
    double tp = 0.0, fp = 0.0;
    double best_j = -1.0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double t = sorted[i].score;
        for (; i < sorted.size() && sorted[i].score == t; ++i) (sorted[i].malignant ? tp : fp) += 1.0;
        RocPoint pt{t, fp / neg, tp / pos};
        const auto& prev = res.roc.back();
        res.auc += (pt.fpr - prev.fpr) * (pt.tpr + prev.tpr) / 2.0;
        res.roc.push_back(pt);
        // FPR never decreases along the sweep, so the first maximum has the best specificity.
        const double j = pt.tpr - pt.fpr;
        if (j > best_j) {
            best_j = j;
            res.sensitivity = pt.tpr;
            res.specificity = 1.0 - pt.fpr;
            res.operating_threshold = t;
        }
    }
    return res;
}

CohortResult evaluate_at(std::span<const LabeledScore> scores, double threshold) {
    const auto [pos, neg] = class_counts(scores);
    double tp = 0.0, tn = 0.0;
    for (const auto& s : scores) {
        const bool call = is_malignant(s.score, threshold);
        if (s.malignant && call) tp += 1.0;
        if (!s.malignant && !call) tn += 1.0;
    }
    CohortResult res = roc(scores);
    res.sensitivity = tp / pos;
    res.specificity = tn / neg;
    res.operating_threshold = threshold;
    return res;
}

std::string roc_csv(const CohortResult& result) {
    std::ostringstream out;
    out.precision(17);
    out << "threshold,fpr,tpr\n";
    for (const auto& p : result.roc) {
        if (std::isinf(p.threshold))
            out << "inf";
        else
            out << p.threshold;
        out << ',' << p.fpr << ',' << p.tpr << '\n';
    }
    return out.str();
}

}  // namespace sonoseg
