#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rpmnet/dataio.hpp"
#include "rpmnet/model.hpp"
#include "rpmnet/openset.hpp"
#include "rpmnet/train.hpp"

namespace rpmnet {

inline constexpr std::string_view kBundleVersion = "rpmnet-bundle/1";

/// Everything needed to score raw flow records after training.
struct ModelBundle {
    ModelParams params;
    Scaler scaler;
    std::optional<Threshold> threshold;
    TrainConfig config;
    std::vector<std::string> feature_names;
    std::string label_column = "Label";
    double split_ratio = 0.8;
    std::uint32_t data_crc32 = 0;  // checksum of the training CSV

    friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

/// Binary layout, all integers little-endian:
///
///   "rpmnet-bundle/1\n"
///   u64 manifest length, manifest (JSON text)
///   u32 section count, then per section:
///     u32 name length, name, u32 rank, rank x u64 dims, f64 values
///   u32 CRC-32 of every preceding byte
std::string serialize_bundle(const ModelBundle& bundle);

/// Throws VersionError for another format version and IntegrityError for a
/// checksum mismatch, truncation or malformed content.
ModelBundle deserialize_bundle(std::string_view bytes);

void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace rpmnet
