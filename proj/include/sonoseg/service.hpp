#pragma once

#include <memory>
#include <optional>
#include <string>

#include "sonoseg/pipeline.hpp"

namespace sonoseg {

struct ServiceConfig {
    PipelineConfig pipeline;
    std::optional<CalibrationSet> calibration;  // default for uploads without one
    std::string cors_origin = "*";
};

// HTTP front end over the shared pipeline. Results are cached by
// (frame content hash, parameters) and never mutated once stored.
class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds (port 0 picks a free one) and serves on a background thread.
    int start(const std::string& host, int port);
    // Binds and serves on the calling thread until stop().
    bool run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// 64-bit FNV-1a, hex encoded.
std::string content_hash(const std::string& bytes);

}  // namespace sonoseg
