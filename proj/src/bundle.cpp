#include "rpmnet/bundle.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "rpmnet/error.hpp"

namespace rpmnet {
namespace {

constexpr std::string_view kMagicPrefix = "rpmnet-bundle/";

class Writer {
public:
    void bytes(std::string_view s) { out_.append(s); }

    template <typename T>
    void integer(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }

    void tensor(const std::string& name, const Tensor& t) {
        integer<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
        bytes(name);
        integer<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) integer<std::uint64_t>(d);
        for (double v : t.data()) integer<std::uint64_t>(std::bit_cast<std::uint64_t>(v));
    }

    std::string& str() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::string_view bytes(std::size_t n) {
        if (n > data_.size() - pos_) throw IntegrityError("bundle: truncated content");
        const std::string_view s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    template <typename T>
    T integer() {
        const std::string_view s = bytes(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(s[i])) << (8 * i);
        return v;
    }

    std::pair<std::string, Tensor> tensor() {
        const auto name_len = integer<std::uint32_t>();
        std::string name(bytes(name_len));
        const auto rank = integer<std::uint32_t>();
        if (rank > 2) throw IntegrityError("bundle: section '" + name + "' has rank " + std::to_string(rank));
        Shape shape(rank);
        for (auto& d : shape) d = integer<std::uint64_t>();
        const std::size_t count = shape_size(shape);
        if (count > (data_.size() - pos_) / 8) throw IntegrityError("bundle: truncated section '" + name + "'");
        std::vector<double> values(count);
        for (double& v : values) v = std::bit_cast<double>(integer<std::uint64_t>());
        return {std::move(name), Tensor(std::move(shape), std::move(values))};
    }

    bool done() const { return pos_ == data_.size(); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

nlohmann::json summary_json(const ScoreSummary& s) {
    return {{"count", s.count}, {"min", s.min}, {"max", s.max}, {"mean", s.mean}};
}

ScoreSummary summary_from(const nlohmann::json& j) {
    ScoreSummary s;
    j.at("count").get_to(s.count);
    j.at("min").get_to(s.min);
    j.at("max").get_to(s.max);
    j.at("mean").get_to(s.mean);
    return s;
}

std::vector<double> as_vector(const Tensor& t) { return t.values(); }

}  // namespace

std::string serialize_bundle(const ModelBundle& b) {
    b.params.validate();
    const ModelParams& p = b.params;

    nlohmann::json manifest = {
        {"format", kBundleVersion},
        {"input_dim", p.dims.input_dim},
        {"hidden_dims", p.dims.hidden},
        {"embed_dim", p.dims.embed_dim},
        {"gamma", p.gamma},
        {"labels", p.labels},
        {"feature_names", b.feature_names},
        {"label_column", b.label_column},
        {"split_ratio", b.split_ratio},
        {"data_crc32", b.data_crc32},
        {"train_config", to_json(b.config)},
    };
    if (b.threshold) {
        manifest["threshold"] = {{"method", b.threshold->method},
                                 {"validation_f1", b.threshold->validation_f1},
                                 {"known", summary_json(b.threshold->known)},
                                 {"unknown", summary_json(b.threshold->unknown)}};
    } else {
        manifest["threshold"] = nullptr;
    }

    std::vector<std::pair<std::string, Tensor>> sections;
    for (std::size_t i = 0; i < 3; ++i) {
        sections.emplace_back("layer" + std::to_string(i + 1) + ".weight", p.weights[i]);
        sections.emplace_back("layer" + std::to_string(i + 1) + ".bias", p.biases[i]);
    }
    sections.emplace_back("reciprocal_points", p.reciprocal_points);
    sections.emplace_back("raw_margins", p.raw_margins);
    sections.emplace_back("scaler.mean", Tensor::vector(b.scaler.mean));
    sections.emplace_back("scaler.std", Tensor::vector(b.scaler.std_dev));
    if (b.threshold) sections.emplace_back("threshold.tau", Tensor::scalar(b.threshold->tau));

    Writer w;
    w.bytes(kBundleVersion);
    w.bytes("\n");
    const std::string text = manifest.dump(2) + "\n";
    w.integer<std::uint64_t>(text.size());
    w.bytes(text);
    w.integer<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
    for (const auto& [name, t] : sections) w.tensor(name, t);
    const std::uint32_t crc = crc32_of(w.str());
    w.integer<std::uint32_t>(crc);
    return std::move(w.str());
}

ModelBundle deserialize_bundle(std::string_view bytes) {
    const auto newline = bytes.find('\n');
    if (bytes.substr(0, kMagicPrefix.size()) != kMagicPrefix || newline == std::string_view::npos || newline > 64) {
        throw IntegrityError("bundle: not an rpmnet bundle");
    }
    const std::string_view version = bytes.substr(0, newline);
    if (version != kBundleVersion) {
        throw VersionError("bundle: file is '" + std::string(version) + "', this build reads '" +
                           std::string(kBundleVersion) + "'");
    }
    if (bytes.size() < newline + 1 + 4) throw IntegrityError("bundle: truncated file");
    const std::string_view body = bytes.substr(0, bytes.size() - 4);
    Reader crc_reader(bytes.substr(bytes.size() - 4));
    if (crc_reader.integer<std::uint32_t>() != crc32_of(body)) {
        throw IntegrityError("bundle: checksum mismatch (file is corrupt or truncated)");
    }

    Reader r(body.substr(newline + 1));
    ModelBundle b;
    try {
        const auto manifest_len = r.integer<std::uint64_t>();
        const nlohmann::json m = nlohmann::json::parse(r.bytes(manifest_len));
        if (m.at("format").get<std::string>() != kBundleVersion) throw IntegrityError("bundle: manifest format mismatch");

        ModelParams& p = b.params;
        m.at("input_dim").get_to(p.dims.input_dim);
        m.at("hidden_dims").get_to(p.dims.hidden);
        m.at("embed_dim").get_to(p.dims.embed_dim);
        m.at("gamma").get_to(p.gamma);
        m.at("labels").get_to(p.labels);
        m.at("feature_names").get_to(b.feature_names);
        m.at("label_column").get_to(b.label_column);
        m.at("split_ratio").get_to(b.split_ratio);
        m.at("data_crc32").get_to(b.data_crc32);
        b.config = train_config_from_json(m.at("train_config"));

        std::map<std::string, Tensor> sections;
        const auto count = r.integer<std::uint32_t>();
        for (std::uint32_t i = 0; i < count; ++i) {
            auto [name, t] = r.tensor();
            sections.emplace(std::move(name), std::move(t));
        }
        if (!r.done()) throw IntegrityError("bundle: trailing bytes after sections");

        auto take = [&](const std::string& name) {
            const auto it = sections.find(name);
            if (it == sections.end()) throw IntegrityError("bundle: missing section '" + name + "'");
            return it->second;
        };
        for (std::size_t i = 0; i < 3; ++i) {
            p.weights[i] = take("layer" + std::to_string(i + 1) + ".weight");
            p.biases[i] = take("layer" + std::to_string(i + 1) + ".bias");
        }
        p.reciprocal_points = take("reciprocal_points");
        p.raw_margins = take("raw_margins");
        b.scaler.mean = as_vector(take("scaler.mean"));
        b.scaler.std_dev = as_vector(take("scaler.std"));

        const nlohmann::json& th = m.at("threshold");
        if (!th.is_null()) {
            Threshold t;
            t.tau = take("threshold.tau").item();
            th.at("method").get_to(t.method);
            th.at("validation_f1").get_to(t.validation_f1);
            t.known = summary_from(th.at("known"));
            t.unknown = summary_from(th.at("unknown"));
            b.threshold = t;
        }
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("bundle: malformed manifest: ") + e.what());
    } catch (const ContractError& e) {
        throw IntegrityError(std::string("bundle: ") + e.what());
    } catch (const ShapeError& e) {
        throw IntegrityError(std::string("bundle: ") + e.what());
    }
    try {
        b.params.validate();
    } catch (const ContractError& e) {
        throw IntegrityError(std::string("bundle: ") + e.what());
    }
    if (b.scaler.mean.size() != b.params.dims.input_dim || b.scaler.std_dev.size() != b.params.dims.input_dim ||
        b.feature_names.size() != b.params.dims.input_dim) {
        throw IntegrityError("bundle: feature schema does not match the model input width");
    }
    return b;
}

void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
    const std::string bytes = serialize_bundle(bundle);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write bundle '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing bundle '" + path.string() + "'");
}

ModelBundle load_model(const std::filesystem::path& path) {
    try {
        return deserialize_bundle(read_file(path));
    } catch (const IntegrityError& e) {
        throw IntegrityError(path.string() + ": " + e.what());
    } catch (const VersionError& e) {
        throw VersionError(path.string() + ": " + e.what());
    }
}

}  // namespace rpmnet
