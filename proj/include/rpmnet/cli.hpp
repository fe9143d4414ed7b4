#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rpmnet::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Audit record written next to every command's primary output as
/// `<output>.manifest.json`.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::map<std::string, std::uint32_t> input_checksums;  // path -> CRC-32
    std::vector<std::string> outputs;
    double wall_clock_seconds = 0.0;
    std::string started_at;  // UTC, ISO-8601
    nlohmann::json notes = nlohmann::json::object();
};

nlohmann::json to_json(const RunManifest& manifest);

struct TrainOptions {
    std::filesystem::path data;
    std::filesystem::path roles;
    std::optional<std::filesystem::path> config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> lr;
    std::optional<double> alpha;
    std::optional<double> lambda;
    std::optional<double> beta;
    std::optional<double> gamma;
    std::optional<std::string> label_column;
};

struct CalibrateOptions {
    std::filesystem::path bundle;
    std::filesystem::path data;
    std::filesystem::path roles;
    std::filesystem::path out;
};

struct EvalOptions {
    std::filesystem::path bundle;
    std::filesystem::path data;
    std::filesystem::path roles;
    std::filesystem::path report;
};

struct ScoreOptions {
    std::filesystem::path bundle;
    std::filesystem::path data;
    std::filesystem::path out;
};

// Each command throws rpmnet::Error on failure.
void cmd_train(const TrainOptions& opts, std::ostream& out);
void cmd_calibrate(const CalibrateOptions& opts, std::ostream& out);
void cmd_eval(const EvalOptions& opts, std::ostream& out);
void cmd_score(const ScoreOptions& opts, std::ostream& out);

/// Parses argv and dispatches. Returns the process exit status; diagnostics
/// go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rpmnet::cli
