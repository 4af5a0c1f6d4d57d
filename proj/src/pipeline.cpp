#include "sonoseg/pipeline.hpp"

#include "sonoseg/error.hpp"

namespace sonoseg {

PreparedFrame prepare_frame(const RFFrame& frame, const PipelineConfig& config) {
    frame.validate();
    PreparedFrame p;
    p.frame = frame;
    p.envelope = detect_envelope(frame);
    p.bmode = form_bmode(p.envelope, config.dynamic_range_db);
    const RealGrid equalized = equalize_histogram(grid_cast<double>(p.bmode.pixels));
    p.diffused = diffuse(equalized, config.diffusion);
    p.residue = emd::residue_image(p.diffused, config.emd);
    return p;
}

SegmentationResult segment_frame(const PreparedFrame& prepared, const SegmentationParams& params) {
    return segment(prepared.residue, params, prepared.frame.spacing());
}

RoiAnalysis analyze_roi(const PreparedFrame& prepared, const ParameterImage& param, const LesionROI& roi,
                        const WeightProfile& profile, const PipelineConfig& config) {
    RoiAnalysis a;
    a.features = extract_features(prepared.bmode, param, roi, config.features);
    a.profile = profile.name;
    try {
        a.score = score(a.features, profile);
        a.malignant = is_malignant(*a.score, config.decision_threshold);
    } catch (const Error& e) {
        a.score_error = e.what();
    }
    return a;
}

FrameResult analyze_segmentation(const PreparedFrame& prepared, const SegmentationResult& seg,
                                 const std::function<ParameterImage()>& param, const WeightProfile& profile,
                                 const PipelineConfig& config) {
    FrameResult r;
    r.frame_id = prepared.frame.frame_id;
    r.threshold_used = seg.threshold_used;
    r.polarity = seg.polarity;
    r.roi_count = seg.rois.size();
    try {
        if (seg.rois.empty()) throw Error("no ROI found");
        r.selected = select_roi(seg.rois, config.roi);
        r.analysis = analyze_roi(prepared, param(), *r.selected, profile, config);
    } catch (const Error& e) {
        r.error = e.what();
    }
    return r;
}

CalibrationSet fallback_calibration(const RFFrame& frame) { return CalibrationSet::identity(frame.sampling_rate_hz / 2.0); }

FrameResult run_frame(const RFFrame& frame, const CalibrationSet& cal, const PipelineConfig& config,
                      const WeightProfile& profile) {
    try {
        const PreparedFrame prepared = prepare_frame(frame, config);
        const SegmentationResult seg = segment_frame(prepared, config.segmentation);
        return analyze_segmentation(
            prepared, seg, [&] { return parameter_images(frame, cal, config.spectral); }, profile, config);
    } catch (const Error& e) {
        FrameResult r;
        r.frame_id = frame.frame_id;
        r.error = e.what();
        return r;
    }
}

}  // namespace sonoseg
