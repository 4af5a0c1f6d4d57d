#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sonoseg/classify.hpp"
#include "sonoseg/emd.hpp"
#include "sonoseg/features.hpp"
#include "sonoseg/frame_io.hpp"
#include "sonoseg/preprocess.hpp"
#include "sonoseg/segmentation.hpp"
#include "sonoseg/spectral.hpp"

namespace sonoseg {

struct PipelineConfig {
    double dynamic_range_db = kDefaultDynamicRangeDb;
    DiffusionParams diffusion;
    emd::EmdParams emd;
    SegmentationParams segmentation;
    RoiSelector roi = LargestRoi{};
    SpectralConfig spectral;
    FeatureConfig features;
    double decision_threshold = kDefaultDecisionThreshold;
};

// Threshold-independent stages of one frame.
struct PreparedFrame {
    RFFrame frame;
    EnvelopeImage envelope;
    BModeImage bmode;
    RealGrid diffused;
    RealGrid residue;
};

PreparedFrame prepare_frame(const RFFrame& frame, const PipelineConfig& config);

SegmentationResult segment_frame(const PreparedFrame& prepared, const SegmentationParams& params);

struct RoiAnalysis {
    FeatureVector features;
    std::string profile;
    std::optional<double> score;
    std::optional<std::string> score_error;
    bool malignant = false;
};

RoiAnalysis analyze_roi(const PreparedFrame& prepared, const ParameterImage& param, const LesionROI& roi,
                        const WeightProfile& profile, const PipelineConfig& config);

struct FrameResult {
    std::string frame_id;
    std::optional<std::string> error;
    double threshold_used = 0.0;
    Polarity polarity = Polarity::dark;
    std::size_t roi_count = 0;
    std::optional<LesionROI> selected;
    std::optional<RoiAnalysis> analysis;
};

// Everything after segmentation. `param` is only invoked when an ROI exists.
FrameResult analyze_segmentation(const PreparedFrame& prepared, const SegmentationResult& seg,
                                 const std::function<ParameterImage()>& param, const WeightProfile& profile,
                                 const PipelineConfig& config);

// Flat calibration up to Nyquist, used when none is supplied.
CalibrationSet fallback_calibration(const RFFrame& frame);

// Full chain for one frame. Domain errors are captured in `error`.
FrameResult run_frame(const RFFrame& frame, const CalibrationSet& cal, const PipelineConfig& config,
                      const WeightProfile& profile);

}  // namespace sonoseg
