#include "rpmnet/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <zlib.h>

#include "rpmnet/error.hpp"
#include "rpmnet/log.hpp"
#include "rpmnet/rng.hpp"

namespace rpmnet {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV

CsvTable parse_csv(std::string_view text) {
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::vector<std::vector<std::string>> lines;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line_no = 1;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        lines.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) throw DataError("csv: stray quote on line " + std::to_string(line_no));
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                field_started = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;
                [[fallthrough]];
            case '\n':
                end_row();
                ++line_no;
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (in_quotes) throw DataError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();

    // Blank lines carry no record.
    std::erase_if(lines, [](const std::vector<std::string>& r) { return r.size() == 1 && trim(r[0]).empty(); });

    CsvTable table;
    if (lines.empty()) throw DataError("csv: empty file");
    for (const std::string& name : lines.front()) table.header.emplace_back(trim(name));
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].size() != table.header.size()) {
            throw DataError("csv: record " + std::to_string(r) + " has " + std::to_string(lines[r].size()) +
                            " fields, header has " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(lines[r]));
    }
    return table;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

CsvTable read_csv_table(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

void write_csv_row(std::ostream& out, std::span<const std::string> fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\r\n") == std::string::npos) {
            out << f;
            continue;
        }
        out << '"';
        for (char c : f) {
            if (c == '"') out << '"';
            out << c;
        }
        out << '"';
    }
    out << '\n';
}

std::optional<double> parse_finite(std::string_view field) {
    field = trim(field);
    if (field.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string format_double(double value) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

FlowDataset load_csv_text(std::string_view text, const CsvSchema& schema) {
    const CsvTable table = parse_csv(text);
    const std::size_t label_col = column_index(table.header, schema.label_column);

    FlowDataset data;
    std::vector<std::size_t> feature_cols;
    if (schema.feature_columns.empty()) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (c == label_col) continue;
            feature_cols.push_back(c);
            data.feature_names.push_back(table.header[c]);
        }
    } else {
        for (const std::string& name : schema.feature_columns) feature_cols.push_back(column_index(table.header, name));
        data.feature_names = schema.feature_columns;
    }
    if (feature_cols.empty()) throw DataError("csv: no feature columns");

    for (const auto& row : table.rows) {
        FlowRecord rec;
        rec.features.reserve(feature_cols.size());
        bool ok = true;
        for (std::size_t c : feature_cols) {
            const auto v = parse_finite(row[c]);
            if (!v) {
                ok = false;
                break;
            }
            rec.features.push_back(*v);
        }
        if (!ok) {
            ++data.dropped;
            continue;
        }
        rec.label = row[label_col];
        data.records.push_back(std::move(rec));
    }
    if (data.dropped > 0) log().warn("dropped {} row(s) with missing, non-numeric or non-finite features", data.dropped);
    if (data.records.empty()) throw DataError("csv: no usable data rows");
    return data;
}

FlowDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    try {
        return load_csv_text(read_file(path), schema);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_csv(const std::filesystem::path& path, const FlowDataset& data, const std::string& label_column) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    std::vector<std::string> fields = data.feature_names;
    fields.push_back(label_column);
    write_csv_row(out, fields);
    for (const FlowRecord& r : data.records) {
        fields.clear();
        for (double v : r.features) fields.push_back(format_double(v));
        fields.push_back(r.label);
        write_csv_row(out, fields);
    }
}

// ---------------------------------------------------------------------------
// Normalization

Scaler fit_scaler(std::span<const FlowRecord> train) {
    if (train.empty()) throw ContractError("fit_scaler: empty training set");
    const std::size_t d = train.front().features.size();
    Scaler s;
    s.mean.assign(d, 0.0);
    s.std_dev.assign(d, 0.0);
    for (const FlowRecord& r : train) {
        if (r.features.size() != d) throw ShapeError("fit_scaler: records differ in width");
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += r.features[j];
    }
    const double n = static_cast<double>(train.size());
    for (double& m : s.mean) m /= n;
    for (const FlowRecord& r : train)
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = r.features[j] - s.mean[j];
            s.std_dev[j] += diff * diff;
        }
    for (double& v : s.std_dev) {
        v = std::sqrt(v / n);
        if (v < kMinStd) v = 1.0;
    }
    return s;
}

std::vector<FlowRecord> apply_scaler(const Scaler& scaler, std::span<const FlowRecord> records) {
    std::vector<FlowRecord> out(records.begin(), records.end());
    for (FlowRecord& r : out) {
        if (r.features.size() != scaler.mean.size()) throw ShapeError("apply_scaler: width mismatch");
        for (std::size_t j = 0; j < r.features.size(); ++j)
            r.features[j] = (r.features[j] - scaler.mean[j]) / scaler.std_dev[j];
    }
    return out;
}

Tensor apply_scaler(const Scaler& scaler, const Tensor& features) {
    if (features.rank() != 2 || features.cols() != scaler.mean.size()) throw ShapeError("apply_scaler: width mismatch");
    Tensor out = features;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = (out(i, j) - scaler.mean[j]) / scaler.std_dev[j];
    return out;
}

std::vector<FlowRecord> invert_scaler(const Scaler& scaler, std::span<const FlowRecord> records) {
    std::vector<FlowRecord> out(records.begin(), records.end());
    for (FlowRecord& r : out) {
        if (r.features.size() != scaler.mean.size()) throw ShapeError("invert_scaler: width mismatch");
        for (std::size_t j = 0; j < r.features.size(); ++j)
            r.features[j] = r.features[j] * scaler.std_dev[j] + scaler.mean[j];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Open-set partitioning

std::string_view role_name(Role role) {
    switch (role) {
        case Role::Known: return "known";
        case Role::ValidationUnknown: return "validation_unknown";
        case Role::TestUnknown: return "test_unknown";
        case Role::Excluded: return "excluded";
    }
    return "unknown";
}

Role ClassRoles::role_of(const std::string& name) const {
    if (const auto it = roles.find(name); it != roles.end()) return it->second;
    if (wildcard) return *wildcard;
    throw DataError("roles: class '" + name + "' has no role");
}

ClassRoles roles_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw DataError("roles: expected a JSON object");
    static const std::map<std::string, Role> sections = {{"known", Role::Known},
                                                          {"validation_unknown", Role::ValidationUnknown},
                                                          {"test_unknown", Role::TestUnknown},
                                                          {"excluded", Role::Excluded}};
    ClassRoles roles;
    for (const auto& [key, value] : doc.items()) {
        if (key == "note") {
            roles.note = value.get<std::string>();
            continue;
        }
        if (key == "wildcard") {
            const auto it = sections.find(value.get<std::string>());
            if (it == sections.end()) throw DataError("roles: unknown wildcard role '" + value.get<std::string>() + "'");
            roles.wildcard = it->second;
            continue;
        }
        const auto section = sections.find(key);
        if (section == sections.end()) throw DataError("roles: unknown key '" + key + "'");
        if (!value.is_array()) throw DataError("roles: '" + key + "' must be a list of class names");
        for (const auto& item : value) {
            const std::string name = item.get<std::string>();
            const auto [it, inserted] = roles.roles.emplace(name, section->second);
            if (!inserted) throw DataError("roles: class '" + name + "' is assigned more than one role");
            if (section->second == Role::Known) roles.known.push_back(name);
        }
    }
    if (roles.known.empty()) throw DataError("roles: no known classes");
    return roles;
}

ClassRoles load_roles(const std::filesystem::path& path) {
    try {
        return roles_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

OpenSetSplit make_split(std::span<const FlowRecord> records, const ClassRoles& roles, double ratio,
                        std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("make_split: ratio must lie in (0, 1)");

    OpenSetSplit split;
    split.vocabulary = roles.known;
    std::set<std::string> unassigned;
    std::map<std::string, std::vector<std::size_t>> by_known_class;
    std::vector<Role> record_role(records.size(), Role::Excluded);

    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::string& label = records[i].label;
        if (!roles.roles.contains(label) && !roles.wildcard) {
            unassigned.insert(label);
            continue;
        }
        const Role role = roles.role_of(label);
        record_role[i] = role;
        split.class_roles.emplace(label, role);
        if (role == Role::Known) by_known_class[label].push_back(i);
    }
    if (!unassigned.empty()) {
        std::string names;
        for (const std::string& n : unassigned) names += (names.empty() ? "'" : ", '") + n + "'";
        throw DataError("roles: classes without a role: " + names);
    }

    Rng rng(seed);
    std::vector<char> in_train(records.size(), 0);
    for (const std::string& cls : split.vocabulary) {
        auto it = by_known_class.find(cls);
        if (it == by_known_class.end()) {
            log().warn("known class '{}' has no records in the data", cls);
            continue;
        }
        std::vector<std::size_t>& idx = it->second;
        if (idx.size() < 2) {
            throw DataError("make_split: known class '" + cls + "' needs at least 2 records, has " +
                            std::to_string(idx.size()));
        }
        rng.shuffle(std::span<std::size_t>(idx));
        const auto n = static_cast<double>(idx.size());
        auto n_train = static_cast<std::size_t>(std::llround(ratio * n));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        for (std::size_t j = 0; j < n_train; ++j) in_train[idx[j]] = 1;
    }

    for (std::size_t i = 0; i < records.size(); ++i) {
        switch (record_role[i]) {
            case Role::Known:
                (in_train[i] ? split.known_train : split.known_test).push_back(records[i]);
                break;
            case Role::ValidationUnknown:
                split.val_unknown.push_back(records[i]);
                break;
            case Role::TestUnknown:
                split.test_unknown.push_back(records[i]);
                break;
            case Role::Excluded:
                break;
        }
    }
    return split;
}

Tensor to_matrix(std::span<const FlowRecord> records, std::size_t width) {
    Tensor out({records.size(), width});
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].features.size() != width) {
            throw ShapeError("to_matrix: record " + std::to_string(i) + " has " +
                             std::to_string(records[i].features.size()) + " features, expected " +
                             std::to_string(width));
        }
        std::copy(records[i].features.begin(), records[i].features.end(), out.row(i).begin());
    }
    return out;
}

std::vector<std::size_t> to_indices(std::span<const FlowRecord> records, const std::vector<std::string>& vocabulary) {
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < vocabulary.size(); ++k) index.emplace(vocabulary[k], k);
    std::vector<std::size_t> out;
    out.reserve(records.size());
    for (const FlowRecord& r : records) {
        const auto it = index.find(r.label);
        if (it == index.end()) throw DataError("label '" + r.label + "' is not in the vocabulary");
        out.push_back(it->second);
    }
    return out;
}

TrainingSet to_training_set(std::span<const FlowRecord> records, const std::vector<std::string>& vocabulary,
                            std::size_t width) {
    return {to_matrix(records, width), to_indices(records, vocabulary), vocabulary};
}

std::uint32_t crc32_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large inputs in chunks.
    while (!bytes.empty()) {
        const std::size_t chunk = std::min<std::size_t>(bytes.size(), 1u << 30);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(chunk));
        bytes.remove_prefix(chunk);
    }
    return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32_of_file(const std::filesystem::path& path) { return crc32_of(read_file(path)); }

}  // namespace rpmnet
