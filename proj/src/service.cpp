#include "sonoseg/service.hpp"

#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <regex>
#include <shared_mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sonoseg/error.hpp"
#include "sonoseg/png.hpp"
#include "sonoseg/report.hpp"

namespace sonoseg {

using nlohmann::json;

std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

struct HttpError {
    int status;
    std::string message;
};

// Write-once store. Computation happens outside the lock; a racing
// duplicate is discarded in favour of whichever value landed first.
class ResultCache {
public:
    template <typename T, typename Fn>
    std::shared_ptr<const T> get(const std::string& key, Fn&& compute) {
        {
            std::shared_lock lock(mutex_);
            if (auto it = items_.find(key); it != items_.end()) return std::static_pointer_cast<const T>(it->second);
        }
        std::shared_ptr<const void> value = std::make_shared<const T>(compute());
        std::unique_lock lock(mutex_);
        auto [it, inserted] = items_.emplace(key, std::move(value));
        return std::static_pointer_cast<const T>(it->second);
    }

private:
    std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<const void>> items_;
};

struct StoredFrame {
    std::string hash;
    std::shared_ptr<const RFFrame> frame;
    std::shared_ptr<const CalibrationSet> calibration;
};

std::string threshold_key(const std::optional<double>& th) { return th ? json(*th).dump() : std::string("otsu"); }

std::optional<double> read_threshold(const json& body) {
    if (!body.is_object() || !body.contains("threshold") || body["threshold"].is_null()) return std::nullopt;
    if (!body["threshold"].is_number()) throw HttpError{400, "threshold must be a number or null"};
    return body["threshold"].get<double>();
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception&) {
        throw HttpError{400, "malformed JSON body"};
    }
}

const std::regex kSafeId("[A-Za-z0-9._-]{1,128}");

}  // namespace

struct Service::Impl {
    ServiceConfig config;
    httplib::Server server;
    std::thread worker;
    ResultCache cache;
    std::shared_mutex frames_mutex;
    std::map<std::string, StoredFrame> frames;

    explicit Impl(ServiceConfig c) : config(std::move(c)) { routes(); }

    StoredFrame lookup(const std::string& id) {
        std::shared_lock lock(frames_mutex);
        auto it = frames.find(id);
        if (it == frames.end()) throw HttpError{404, "unknown frame: " + id};
        return it->second;
    }

    std::shared_ptr<const PreparedFrame> prepared(const StoredFrame& f) {
        return cache.get<PreparedFrame>(f.hash + ":prep", [&] { return prepare_frame(*f.frame, config.pipeline); });
    }

    std::shared_ptr<const SegmentationResult> segmentation(const StoredFrame& f, const std::optional<double>& th) {
        auto prep = prepared(f);
        return cache.get<SegmentationResult>(f.hash + ":seg:" + threshold_key(th), [&] {
            SegmentationParams params = config.pipeline.segmentation;
            params.threshold_override = th;
            return segment_frame(*prep, params);
        });
    }

    std::shared_ptr<const ParameterImage> params(const StoredFrame& f) {
        return cache.get<ParameterImage>(f.hash + ":param", [&] {
            return parameter_images(*f.frame, *f.calibration, config.pipeline.spectral);
        });
    }

    std::string upload(const httplib::Request& req) {
        if (!req.has_file("header") || !req.has_file("rf")) throw HttpError{400, "multipart parts 'header' and 'rf' required"};
        const std::string header = req.get_file_value("header").content;
        const std::string rf = req.get_file_value("rf").content;
        auto frame = std::make_shared<RFFrame>(parse_rf_frame(header, rf));
        std::shared_ptr<const CalibrationSet> cal;
        std::string cal_text;
        if (req.has_file("calibration")) {
            cal_text = req.get_file_value("calibration").content;
            cal = std::make_shared<const CalibrationSet>(parse_calibration(cal_text));
        } else if (config.calibration) {
            cal = std::make_shared<const CalibrationSet>(*config.calibration);
        } else {
            cal = std::make_shared<const CalibrationSet>(fallback_calibration(*frame));
        }
        const std::string hash = content_hash(header + '\0' + rf + '\0' + calibration_json(*cal));
        if (!std::regex_match(frame->frame_id, kSafeId)) frame->frame_id = "frame-" + hash;
        std::unique_lock lock(frames_mutex);
        frames[frame->frame_id] = StoredFrame{hash, frame, cal};
        return frame->frame_id;
    }

    json features(const StoredFrame& f, std::size_t label, const json& body) {
        std::string profile_name = "combined";
        WeightProfile profile;
        if (body.contains("profile") && body["profile"].is_object()) {
            profile = parse_profile(body["profile"].dump());
        } else {
            if (body.contains("profile")) {
                if (!body["profile"].is_string()) throw HttpError{400, "profile must be a name or an object"};
                profile_name = body["profile"].get<std::string>();
            }
            profile = resolve_profile(profile_name);
        }
        auto seg = segmentation(f, read_threshold(body));
        if (label >= seg->rois.size()) throw HttpError{404, "unknown ROI label: " + std::to_string(label)};
        PipelineConfig cfg = config.pipeline;
        cfg.roi = RoiIndex{label};
        auto prep = prepared(f);
        return frame_json(analyze_segmentation(*prep, *seg, [&] { return *params(f); }, profile, cfg));
    }

    template <typename Fn>
    httplib::Server::Handler guard(Fn fn) {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            auto fail = [&](int status, const std::string& msg) {
                res.status = status;
                res.set_content(json{{"error", msg}}.dump(), "application/json");
            };
            try {
                fn(req, res);
            } catch (const HttpError& e) {
                fail(e.status, e.message);
            } catch (const Error& e) {
                fail(422, e.what());
            } catch (const json::exception& e) {
                fail(400, e.what());
            } catch (const std::exception& e) {
                fail(500, e.what());
            }
        };
    }

    static void send_json(httplib::Response& res, const json& j) { res.set_content(j.dump(), "application/json"); }

    void routes() {
        server.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Origin", config.cors_origin);
        });
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        server.Post("/frames", guard([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, {{"frame_id", upload(req)}});
                    }));
        server.Get(R"(/frames/([^/]+)/bmode\.png)", guard([this](const httplib::Request& req, httplib::Response& res) {
                       auto prep = prepared(lookup(req.matches[1]));
                       res.set_content(encode_png(prep->bmode.pixels), "image/png");
                   }));
        server.Get(R"(/frames/([^/]+)/residue\.png)", guard([this](const httplib::Request& req, httplib::Response& res) {
                       auto prep = prepared(lookup(req.matches[1]));
                       res.set_content(encode_png(to_gray(prep->residue)), "image/png");
                   }));
        server.Post(R"(/frames/([^/]+)/segment)", guard([this](const httplib::Request& req, httplib::Response& res) {
                        auto f = lookup(req.matches[1]);
                        send_json(res, segmentation_json(*segmentation(f, read_threshold(parse_body(req)))));
                    }));
        server.Get(R"(/frames/([^/]+)/rois)", guard([this](const httplib::Request& req, httplib::Response& res) {
                       auto f = lookup(req.matches[1]);
                       std::optional<double> th;
                       if (req.has_param("threshold")) {
                           try {
                               th = std::stod(req.get_param_value("threshold"));
                           } catch (const std::exception&) {
                               throw HttpError{400, "threshold must be a number"};
                           }
                       }
                       send_json(res, segmentation_json(*segmentation(f, th)));
                   }));
        server.Post(R"(/frames/([^/]+)/rois/(\d+)/features)",
                    guard([this](const httplib::Request& req, httplib::Response& res) {
                        auto f = lookup(req.matches[1]);
                        send_json(res, features(f, std::stoul(req.matches[2]), parse_body(req)));
                    }));
        server.Get("/profiles", guard([](const httplib::Request&, httplib::Response& res) {
                       json list = json::array();
                       for (const auto& name : builtin_profile_names()) list.push_back(profile_json(builtin_profile(name)));
                       send_json(res, {{"profiles", list}});
                   }));
    }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
    int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    require(bound > 0, "cannot bind " + host + ":" + std::to_string(port));
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

bool Service::run(const std::string& host, int port) { return impl_->server.listen(host, port); }

void Service::stop() {
    impl_->server.stop();
    if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace sonoseg
