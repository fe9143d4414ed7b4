#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpmnet/tensor.hpp"
#include "rpmnet/train.hpp"

namespace rpmnet {

// ---------------------------------------------------------------------------
// CSV

/// Parsed RFC-4180 document. Header names are trimmed of surrounding blanks;
/// data fields are kept verbatim.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv_table(const std::filesystem::path& path);
void write_csv_row(std::ostream& out, std::span<const std::string> fields);

/// Parses a whole (blank-trimmed) field as a finite double.
std::optional<double> parse_finite(std::string_view field);
/// Shortest representation that parses back to the same double.
std::string format_double(double value);

struct CsvSchema {
    std::string label_column = "Label";
    /// Empty means every column except the label.
    std::vector<std::string> feature_columns;
};

struct FlowRecord {
    std::vector<double> features;
    std::string label;

    friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

struct FlowDataset {
    std::vector<std::string> feature_names;
    std::vector<FlowRecord> records;
    std::size_t dropped = 0;  // rows with a missing, non-numeric, NaN or Inf feature
};

/// Loads flow records, dropping (and counting) rows whose features are not
/// finite numbers. Throws DataError on a missing column or an empty result.
FlowDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
FlowDataset load_csv_text(std::string_view text, const CsvSchema& schema);
void write_csv(const std::filesystem::path& path, const FlowDataset& data, const std::string& label_column);

// ---------------------------------------------------------------------------
// Normalization

/// Per-feature z-score statistics (population standard deviation).
struct Scaler {
    std::vector<double> mean;
    std::vector<double> std_dev;

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

/// Features with std below this are treated as constant (std := 1).
inline constexpr double kMinStd = 1e-12;

Scaler fit_scaler(std::span<const FlowRecord> train);
std::vector<FlowRecord> apply_scaler(const Scaler& scaler, std::span<const FlowRecord> records);
Tensor apply_scaler(const Scaler& scaler, const Tensor& features);
std::vector<FlowRecord> invert_scaler(const Scaler& scaler, std::span<const FlowRecord> records);

// ---------------------------------------------------------------------------
// Open-set partitioning

enum class Role { Known, ValidationUnknown, TestUnknown, Excluded };

std::string_view role_name(Role role);

/// Class-name to role assignment. Known classes keep their listed order,
/// which becomes the model's label vocabulary.
struct ClassRoles {
    std::vector<std::string> known;
    std::map<std::string, Role> roles;
    std::optional<Role> wildcard;  // role for names not listed
    std::string note;

    /// Throws DataError when the name has no role and there is no wildcard.
    Role role_of(const std::string& name) const;
};

/// Document shape:
///   {"known": [...], "validation_unknown": [...], "test_unknown": [...],
///    "excluded": [...], "wildcard": "<role>", "note": "..."}
ClassRoles roles_from_json(const nlohmann::json& doc);
ClassRoles load_roles(const std::filesystem::path& path);

struct OpenSetSplit {
    std::vector<std::string> vocabulary;
    std::vector<FlowRecord> known_train;
    std::vector<FlowRecord> known_test;
    std::vector<FlowRecord> val_unknown;
    std::vector<FlowRecord> test_unknown;
    std::map<std::string, Role> class_roles;  // roles of classes present in the data
};

/// Stratified per-class split of known classes (train share `ratio`, at
/// least one sample on each side), with unknown-role records routed whole.
/// Partitions keep file order.
OpenSetSplit make_split(std::span<const FlowRecord> records, const ClassRoles& roles, double ratio,
                        std::uint64_t seed);

Tensor to_matrix(std::span<const FlowRecord> records, std::size_t width);
/// Label indices into `vocabulary`; throws DataError for a label not in it.
std::vector<std::size_t> to_indices(std::span<const FlowRecord> records, const std::vector<std::string>& vocabulary);
TrainingSet to_training_set(std::span<const FlowRecord> records, const std::vector<std::string>& vocabulary,
                            std::size_t width);

/// CRC-32 (IEEE) of a byte string / file.
std::uint32_t crc32_of(std::string_view bytes);
std::uint32_t crc32_of_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace rpmnet
