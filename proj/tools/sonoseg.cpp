#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sonoseg/emd.hpp"
#include "sonoseg/error.hpp"
#include "sonoseg/parallel.hpp"
#include "sonoseg/phantom.hpp"
#include "sonoseg/pipeline.hpp"
#include "sonoseg/png.hpp"
#include "sonoseg/report.hpp"
#include "sonoseg/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sonoseg;

namespace {

struct RunOptions {
    std::string input;
    std::string out = "report";
    std::string calibration;
    std::string labels;
    std::string profile = "combined";
    std::optional<double> threshold;
    std::string roi = "largest";
    std::string band;
    std::string dump_imfs;
    bool emit_param_images = false;
    bool roc = false;
    bool deterministic = false;
    unsigned jobs = 0;
    int serve = -1;
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

std::pair<double, double> parse_band(const std::string& text) {
    auto colon = text.find(':');
    require(colon != std::string::npos, "band must be <lo:hi> in MHz");
    try {
        double lo = std::stod(text.substr(0, colon)), hi = std::stod(text.substr(colon + 1));
        require(lo < hi, "band must satisfy lo < hi");
        return {lo * 1e6, hi * 1e6};
    } catch (const std::logic_error&) {
        throw Error("band must be <lo:hi> in MHz");
    }
}

fs::path resolve_input(const std::string& input) {
    if (input != "-") return input;
    std::string line;
    while (std::getline(std::cin, line)) {
        line.erase(line.find_last_not_of(" \t\r\n") + 1);
        if (!line.empty()) return line;
    }
    throw Error("no input path on stdin");
}

std::vector<fs::path> discover_frames(const fs::path& input) {
    require(fs::is_directory(input), "input is not a directory: " + input.string());
    if (fs::exists(input / "header.json")) return {input};
    std::vector<fs::path> frames;
    for (const auto& entry : fs::directory_iterator(input))
        if (entry.is_directory() && fs::exists(entry.path() / "header.json")) frames.push_back(entry.path());
    std::sort(frames.begin(), frames.end());
    return frames;
}

std::map<std::string, bool> read_labels(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::map<std::string, bool> labels;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        line.erase(line.find_last_not_of(" \t\r\n") + 1);
        if (line.empty()) continue;
        auto comma = line.find(',');
        require(comma != std::string::npos, "malformed labels line: " + line);
        std::string id = line.substr(0, comma), label = line.substr(comma + 1);
        if (first && id == "frame_id") {
            first = false;
            continue;
        }
        first = false;
        if (label == "malignant" || label == "1")
            labels[id] = true;
        else if (label == "benign" || label == "0")
            labels[id] = false;
        else
            throw Error("unknown label: " + label);
    }
    return labels;
}

void write_grid_csv(const RealGrid& g, const fs::path& path) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
            if (c) out << ',';
            if (std::isfinite(g(r, c))) out << g(r, c);
            else out << "nan";
        }
        out << '\n';
    }
    write_text(path, out.str());
}

std::string timestamp() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

int serve(int port, const PipelineConfig& cfg, const std::optional<CalibrationSet>& cal) {
    ServiceConfig sc;
    sc.pipeline = cfg;
    sc.calibration = cal;
    Service service(sc);
    std::cerr << "listening on 0.0.0.0:" << port << "\n";
    return service.run("0.0.0.0", port) ? 0 : 1;
}

PipelineConfig pipeline_config(const RunOptions& o) {
    PipelineConfig cfg;
    cfg.segmentation.threshold_override = o.threshold;
    cfg.roi = parse_roi_selector(o.roi);
    if (!o.band.empty()) std::tie(cfg.spectral.band_lo_hz, cfg.spectral.band_hi_hz) = parse_band(o.band);
    cfg.spectral.validate();
    return cfg;
}

int run(const RunOptions& o) {
    const PipelineConfig cfg = pipeline_config(o);
    const WeightProfile profile = resolve_profile(o.profile);

    std::optional<CalibrationSet> cal;
    if (!o.calibration.empty()) cal = load_calibration(o.calibration);
    if (o.serve >= 0) return serve(o.serve, cfg, cal);

    require(!o.input.empty(), "--input is required");
    const fs::path input = resolve_input(o.input);
    if (!cal && fs::exists(input / "calibration.json")) cal = load_calibration(input / "calibration.json");
    const auto paths = discover_frames(input);
    require(!paths.empty(), "no RF containers under " + input.string());

    const fs::path out = o.out;
    fs::create_directories(out);

    std::vector<FrameResult> results(paths.size());
    parallel_for(
        paths.size(),
        [&](std::size_t i) {
            RFFrame frame;
            try {
                frame = load_rf_frame(paths[i]);
            } catch (const Error& e) {
                results[i].frame_id = paths[i].filename().string();
                results[i].error = e.what();
                return;
            }
            const CalibrationSet frame_cal = cal ? *cal : fallback_calibration(frame);
            try {
                const PreparedFrame prepared = prepare_frame(frame, cfg);
                if (!o.dump_imfs.empty()) emd::dump_imfs(prepared.diffused, cfg.emd, fs::path(o.dump_imfs) / frame.frame_id);
                const SegmentationResult seg = segment_frame(prepared, cfg.segmentation);
                std::optional<ParameterImage> param;
                auto params = [&] {
                    if (!param) param = parameter_images(frame, frame_cal, cfg.spectral);
                    return *param;
                };
                results[i] = analyze_segmentation(prepared, seg, params, profile, cfg);
                if (o.emit_param_images) {
                    const fs::path dir = out / "param" / frame.frame_id;
                    fs::create_directories(dir);
                    params();
                    write_grid_csv(param->slope, dir / "slope.csv");
                    write_grid_csv(param->intercept, dir / "intercept.csv");
                    write_grid_csv(param->midband, dir / "midband.csv");
                }
            } catch (const Error& e) {
                results[i] = FrameResult{};
                results[i].frame_id = frame.frame_id;
                results[i].error = e.what();
            }
        },
        o.jobs);

    json report;
    if (!o.deterministic) report["generated_at"] = timestamp();
    report["profile"] = profile.name;
    report["threshold_override"] = o.threshold ? json(*o.threshold) : json(nullptr);
    report["roi_selector"] = o.roi;
    report["band_hz"] = {cfg.spectral.band_lo_hz, cfg.spectral.band_hi_hz};
    report["frames"] = json::array();
    std::string csv = features_csv_header();
    std::size_t failures = 0;
    for (const auto& r : results) {
        report["frames"].push_back(frame_json(r));
        csv += features_csv_row(r);
        if (r.error) ++failures;
        if (r.selected) write_mask_png(r.selected->mask, out / (r.frame_id + "_roi" + std::to_string(r.selected->label) + ".png"));
    }

    if (o.roc) {
        const fs::path labels_path = o.labels.empty() ? input / "labels.csv" : fs::path(o.labels);
        if (!fs::exists(labels_path)) {
            std::cerr << "warning: --roc without labels (" << labels_path.string() << "), skipping\n";
        } else {
            const auto labels = read_labels(labels_path);
            std::vector<std::string> names = builtin_profile_names();
            if (std::find(names.begin(), names.end(), profile.name) == names.end()) names.push_back(profile.name);
            json summary;
            summary["profile"] = profile.name;
            summary["profiles"] = json::object();
            for (const auto& name : names) {
                const WeightProfile p = name == profile.name ? profile : builtin_profile(name);
                std::vector<LabeledScore> scores;
                std::size_t excluded = 0;
                for (const auto& r : results) {
                    auto it = labels.find(r.frame_id);
                    if (it == labels.end() || !r.analysis) {
                        ++excluded;
                        continue;
                    }
                    try {
                        scores.push_back({score(r.analysis->features, p), it->second});
                    } catch (const Error&) {
                        ++excluded;
                    }
                }
                try {
                    const CohortResult c = roc(scores);
                    json block = cohort_json(c);
                    block["scored"] = scores.size();
                    block["excluded"] = excluded;
                    summary["profiles"][name] = block;
                    if (name == profile.name) {
                        report["cohort"] = cohort_json(c);
                        write_text(out / "roc.csv", roc_csv(c));
                    }
                } catch (const Error& e) {
                    summary["profiles"][name] = {{"error", e.what()}, {"scored", scores.size()}, {"excluded", excluded}};
                }
            }
            write_text(out / "summary.json", summary.dump(2) + "\n");
        }
    }

    write_text(out / "report.json", report.dump(2) + "\n");
    write_text(out / "features.csv", csv);
    std::cerr << results.size() - failures << "/" << results.size() << " frames analysed\n";
    return failures == results.size() ? 1 : 0;
}

struct PhantomOptions {
    std::string out;
    std::string cohort;
    std::uint64_t seed = 1;
    double contrast_db = 10.0;
    double blur_mm = 0.0;
};

int phantom(const PhantomOptions& o) {
    fs::path out = o.out;
    if (out.empty()) {
        const std::string tag = o.cohort.empty() ? "single" : "cohort-" + o.cohort;
        std::string name = "sonoseg-phantom-" + tag + "-" + std::to_string(o.seed);
        std::replace(name.begin(), name.end(), ':', '_');
        out = fs::temp_directory_path() / name;
    }
    if (!o.cohort.empty()) {
        auto colon = o.cohort.find(':');
        require(colon != std::string::npos, "cohort must be <benign:malignant>");
        std::size_t nb = 0, nm = 0;
        try {
            nb = std::stoul(o.cohort.substr(0, colon));
            nm = std::stoul(o.cohort.substr(colon + 1));
        } catch (const std::logic_error&) {
            throw Error("cohort must be <benign:malignant>");
        }
        write_cohort(generate_cohort(nb, nm, o.seed), out);
    } else {
        PhantomSpec spec;
        spec.speckle_seed = o.seed;
        spec.lesion_echogenicity_db = spec.background_echogenicity_db - o.contrast_db;
        spec.border_blur_mm = o.blur_mm;
        write_phantom(generate(spec), out);
    }
    std::cout << fs::absolute(out).string() << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-automatic breast ultrasound lesion segmentation and characterization"};
    app.require_subcommand(0, 1);

    int top_serve = -1;
    std::string top_calibration;
    app.add_option("--serve", top_serve, "Start the HTTP service on this port");
    app.add_option("--calibration", top_calibration, "Default calibration for the service");

    RunOptions ro;
    auto* run_cmd = app.add_subcommand("run", "Analyse RF frames and write reports");
    run_cmd->add_option("--input", ro.input, "Frame directory, single container, or '-' to read the path from stdin");
    run_cmd->add_option("--out", ro.out, "Output directory");
    run_cmd->add_option("--calibration", ro.calibration, "Calibration JSON (default: <input>/calibration.json)");
    run_cmd->add_option("--labels", ro.labels, "Truth labels CSV (default: <input>/labels.csv)");
    run_cmd->add_option("--profile", ro.profile, "spectral|morphometric|combined|file:<path>");
    run_cmd->add_option("--threshold", ro.threshold, "Override the Otsu threshold");
    run_cmd->add_option("--roi", ro.roi, "largest|index:<k>|point:<x>,<y>");
    run_cmd->add_option("--band", ro.band, "Regression band <lo:hi> in MHz");
    run_cmd->add_option("--dump-imfs", ro.dump_imfs, "Write per-line IMFs as CSV under this directory");
    run_cmd->add_flag("--emit-param-images", ro.emit_param_images, "Write slope/intercept/midband CSV grids");
    run_cmd->add_flag("--roc", ro.roc, "Write roc.csv and summary.json from labels.csv");
    run_cmd->add_flag("--deterministic", ro.deterministic, "Omit timestamps from report.json");
    run_cmd->add_option("--jobs", ro.jobs, "Worker threads (0 = hardware concurrency)");
    run_cmd->add_option("--serve", ro.serve, "Start the HTTP service on this port instead");

    PhantomOptions po;
    auto* ph_cmd = app.add_subcommand("phantom", "Write synthetic RF phantoms and print their directory");
    ph_cmd->add_option("--out", po.out, "Output directory (default: under the temp directory)");
    ph_cmd->add_option("--cohort", po.cohort, "<benign:malignant> cohort with planted features");
    ph_cmd->add_option("--seed", po.seed, "Random seed");
    ph_cmd->add_option("--contrast", po.contrast_db, "Background minus lesion level in dB (single phantom)");
    ph_cmd->add_option("--blur", po.blur_mm, "Border blur in mm (single phantom)");

    int serve_port = 8080;
    std::string serve_calibration, serve_band;
    auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP service");
    serve_cmd->add_option("--port", serve_port, "Port");
    serve_cmd->add_option("--calibration", serve_calibration, "Default calibration JSON");
    serve_cmd->add_option("--band", serve_band, "Regression band <lo:hi> in MHz");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return run(ro);
        if (*ph_cmd) return phantom(po);
        if (*serve_cmd || top_serve >= 0) {
            RunOptions so;
            so.band = serve_band;
            const int port = *serve_cmd ? serve_port : top_serve;
            const std::string& cal_path = *serve_cmd ? serve_calibration : top_calibration;
            std::optional<CalibrationSet> cal;
            if (!cal_path.empty()) cal = load_calibration(cal_path);
            return serve(port, pipeline_config(so), cal);
        }
        std::cerr << app.help();
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
