#include "rpmnet/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rpmnet/bundle.hpp"
#include "rpmnet/dataio.hpp"
#include "rpmnet/error.hpp"
#include "rpmnet/log.hpp"
#include "rpmnet/metrics.hpp"
#include "rpmnet/openset.hpp"
#include "rpmnet/train.hpp"

namespace rpmnet::cli {
namespace {

namespace fs = std::filesystem;

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write '" + path.string() + "'");
    f << text;
}

fs::path sidecar(const fs::path& primary, const std::string& suffix) {
    return fs::path(primary.string() + suffix);
}

void write_manifest(const fs::path& primary, RunManifest manifest, const Stopwatch& clock) {
    const fs::path path = sidecar(primary, ".manifest.json");
    manifest.outputs.push_back(path.string());
    manifest.wall_clock_seconds = clock.seconds();
    write_text(path, to_json(manifest).dump(2) + "\n");
}

bool same_file(const fs::path& a, const fs::path& b) {
    std::error_code ec;
    if (fs::exists(a, ec) && fs::exists(b, ec)) return fs::equivalent(a, b, ec);
    return fs::weakly_canonical(a, ec) == fs::weakly_canonical(b, ec);
}

struct DataSettings {
    CsvSchema schema;
    double split_ratio = 0.8;
};

// Splits a config document into data settings and training hyperparameters.
std::pair<DataSettings, TrainConfig> parse_config_file(const fs::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw DataError(path.string() + ": expected a JSON object");
    DataSettings data;
    try {
        if (doc.contains("label_column")) doc.at("label_column").get_to(data.schema.label_column);
        if (doc.contains("feature_columns")) doc.at("feature_columns").get_to(data.schema.feature_columns);
        if (doc.contains("split_ratio")) doc.at("split_ratio").get_to(data.split_ratio);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    doc.erase("label_column");
    doc.erase("feature_columns");
    doc.erase("split_ratio");
    try {
        return {data, train_config_from_json(doc)};
    } catch (const ContractError& e) {
        throw ContractError(path.string() + ": " + e.what());
    }
}

struct PreparedData {
    OpenSetSplit split;
    std::vector<std::string> feature_names;
    std::uint32_t data_crc = 0;
};

PreparedData load_and_split(const fs::path& data_path, const fs::path& roles_path, const CsvSchema& schema,
                            double ratio, std::uint64_t seed) {
    PreparedData p;
    p.data_crc = crc32_of_file(data_path);
    const FlowDataset data = load_csv(data_path, schema);
    p.feature_names = data.feature_names;
    const ClassRoles roles = load_roles(roles_path);
    try {
        p.split = make_split(data.records, roles, ratio, seed);
    } catch (const DataError& e) {
        throw DataError(std::string(e.what()) + " (roles config: " + roles_path.string() + ")");
    }
    return p;
}

// Re-derives the training split of a bundle from the same CSV.
PreparedData split_for_bundle(const ModelBundle& bundle, const fs::path& data_path, const fs::path& roles_path) {
    CsvSchema schema;
    schema.label_column = bundle.label_column;
    schema.feature_columns = bundle.feature_names;
    PreparedData p = load_and_split(data_path, roles_path, schema, bundle.split_ratio, bundle.config.seed);
    if (p.data_crc != bundle.data_crc32) {
        log().warn("'{}' differs from the training data (crc32 {:08x} vs {:08x}); the known split may overlap "
                   "training records",
                   data_path.string(), p.data_crc, bundle.data_crc32);
    }
    if (p.split.vocabulary != bundle.params.labels) {
        throw DataError("known classes in '" + roles_path.string() + "' do not match the bundle's label vocabulary");
    }
    return p;
}

Tensor scaled_matrix(const ModelBundle& bundle, std::span<const FlowRecord> records) {
    return apply_scaler(bundle.scaler, to_matrix(records, bundle.params.dims.input_dim));
}

std::vector<double> scores_of(const std::vector<ScoredSample>& scored) {
    std::vector<double> out;
    out.reserve(scored.size());
    for (const ScoredSample& s : scored) out.push_back(s.score);
    return out;
}

std::string metric_text(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "n/a"; }

}  // namespace

nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [path, crc] : m.input_checksums) inputs[path] = fmt::format("{:08x}", crc);
    return {
        {"command", m.command},
        {"config", m.config},
        {"seed", m.seed},
        {"inputs_crc32", inputs},
        {"outputs", m.outputs},
        {"wall_clock_seconds", m.wall_clock_seconds},
        {"started_at", m.started_at},
        {"versions", {{"rpmnet", kToolVersion}, {"bundle_format", kBundleVersion}}},
        {"notes", m.notes},
    };
}

void cmd_train(const TrainOptions& opts, std::ostream& out) {
    const Stopwatch clock;
    RunManifest manifest;
    manifest.command = "train";
    manifest.started_at = utc_now();

    DataSettings settings;
    TrainConfig config;
    if (opts.config) std::tie(settings, config) = parse_config_file(*opts.config);
    if (opts.seed) config.seed = *opts.seed;
    if (opts.epochs) config.epochs = *opts.epochs;
    if (opts.batch_size) config.batch_size = *opts.batch_size;
    if (opts.lr) config.adam.lr = *opts.lr;
    if (opts.alpha) config.weights.alpha = *opts.alpha;
    if (opts.lambda) config.weights.lambda = *opts.lambda;
    if (opts.beta) config.weights.beta = *opts.beta;
    if (opts.gamma) config.gamma = *opts.gamma;
    if (opts.label_column) settings.schema.label_column = *opts.label_column;
    config.validate();

    const PreparedData prepared =
        load_and_split(opts.data, opts.roles, settings.schema, settings.split_ratio, config.seed);
    const OpenSetSplit& split = prepared.split;
    if (split.known_train.empty()) throw DataError("no known-class records to train on");

    ModelBundle bundle;
    bundle.scaler = fit_scaler(split.known_train);
    bundle.label_column = settings.schema.label_column;
    bundle.split_ratio = settings.split_ratio;
    bundle.data_crc32 = prepared.data_crc;
    bundle.config = config;
    bundle.feature_names = prepared.feature_names;

    const auto scaled = apply_scaler(bundle.scaler, split.known_train);
    const TrainingSet train_set = to_training_set(scaled, split.vocabulary, bundle.feature_names.size());
    log().info("training on {} records, {} known classes, {} features", train_set.size(),
               split.vocabulary.size(), bundle.feature_names.size());
    TrainResult result = train(train_set, config);
    bundle.params = std::move(result.params);

    save_model(bundle, opts.out);
    const fs::path history_path = sidecar(opts.out, ".history.tsv");
    {
        std::ostringstream h;
        write_history(h, result.history);
        write_text(history_path, h.str());
    }

    nlohmann::json effective = to_json(config);
    effective["label_column"] = settings.schema.label_column;
    effective["feature_columns"] = bundle.feature_names;
    effective["split_ratio"] = settings.split_ratio;
    manifest.config = effective;
    manifest.seed = config.seed;
    manifest.input_checksums[opts.data.string()] = prepared.data_crc;
    manifest.input_checksums[opts.roles.string()] = crc32_of_file(opts.roles);
    if (opts.config) manifest.input_checksums[opts.config->string()] = crc32_of_file(*opts.config);
    manifest.outputs = {opts.out.string(), history_path.string()};
    manifest.notes["known_train"] = split.known_train.size();
    manifest.notes["known_test"] = split.known_test.size();
    manifest.notes["validation_unknown"] = split.val_unknown.size();
    manifest.notes["test_unknown"] = split.test_unknown.size();
    write_manifest(opts.out, std::move(manifest), clock);

    const auto& last = result.history.epochs;
    out << "wrote " << opts.out.string() << " (" << last.size() << " epochs";
    if (!last.empty()) out << fmt::format(", final loss {:.6f}, train acc {:.4f}", last.back().loss.total, last.back().train_accuracy);
    out << ")\n";
}

void cmd_calibrate(const CalibrateOptions& opts, std::ostream& out) {
    const Stopwatch clock;
    if (same_file(opts.bundle, opts.out)) {
        throw ContractError("calibrate writes a new bundle; --out must differ from --bundle");
    }
    RunManifest manifest;
    manifest.command = "calibrate";
    manifest.started_at = utc_now();

    ModelBundle bundle = load_model(opts.bundle);
    const PreparedData prepared = split_for_bundle(bundle, opts.data, opts.roles);
    const OpenSetSplit& split = prepared.split;
    if (split.val_unknown.empty()) {
        throw DataError("no validation-unknown records in '" + opts.data.string() +
                        "'; assign classes to validation_unknown in roles config '" + opts.roles.string() + "'");
    }

    const auto known_scores = scores_of(score(scaled_matrix(bundle, split.known_train), bundle.params));
    const auto unknown_scores = scores_of(score(scaled_matrix(bundle, split.val_unknown), bundle.params));
    const Threshold threshold = calibrate(known_scores, unknown_scores);

    if (bundle.threshold) {
        manifest.notes["supersedes"] = {{"bundle", opts.bundle.string()},
                                        {"tau", format_double(bundle.threshold->tau)},
                                        {"method", bundle.threshold->method}};
    }
    bundle.threshold = threshold;
    save_model(bundle, opts.out);

    manifest.config = {{"method", threshold.method}, {"known_source", "known_train"}};
    manifest.seed = bundle.config.seed;
    manifest.input_checksums[opts.bundle.string()] = crc32_of_file(opts.bundle);
    manifest.input_checksums[opts.data.string()] = prepared.data_crc;
    manifest.input_checksums[opts.roles.string()] = crc32_of_file(opts.roles);
    manifest.outputs = {opts.out.string()};
    manifest.notes["tau"] = format_double(threshold.tau);
    manifest.notes["validation_f1"] = threshold.validation_f1;
    write_manifest(opts.out, std::move(manifest), clock);

    out << fmt::format("tau = {} (validation unknown-F1 {:.4f}, {} known / {} unknown scores)\n",
                       format_double(threshold.tau), threshold.validation_f1, known_scores.size(),
                       unknown_scores.size());
}

void cmd_eval(const EvalOptions& opts, std::ostream& out) {
    const Stopwatch clock;
    const ModelBundle bundle = load_model(opts.bundle);
    if (!bundle.threshold) {
        throw ContractError("bundle '" + opts.bundle.string() +
                            "' has no rejection threshold; run `rpmnet calibrate` first");
    }
    const PreparedData prepared = split_for_bundle(bundle, opts.data, opts.roles);
    const OpenSetSplit& split = prepared.split;
    if (split.known_test.empty()) throw DataError("no known-class test records");

    const auto known_labels = to_indices(split.known_test, bundle.params.labels);
    const EvalReport report = evaluate(bundle.params, *bundle.threshold, scaled_matrix(bundle, split.known_test),
                                       known_labels, scaled_matrix(bundle, split.test_unknown));
    write_text(opts.report, to_json(report).dump(2) + "\n");

    RunManifest manifest;
    manifest.command = "eval";
    manifest.started_at = utc_now();
    manifest.config = {{"tau", format_double(bundle.threshold->tau)}};
    manifest.seed = bundle.config.seed;
    manifest.input_checksums[opts.bundle.string()] = crc32_of_file(opts.bundle);
    manifest.input_checksums[opts.data.string()] = prepared.data_crc;
    manifest.input_checksums[opts.roles.string()] = crc32_of_file(opts.roles);
    manifest.outputs = {opts.report.string()};
    write_manifest(opts.report, std::move(manifest), clock);

    out << fmt::format("Precision {:.4f}\nRecall    {:.4f}\nF1-Score  {:.4f}\n", report.known.precision,
                       report.known.recall, report.known.f1);
    out << "AUROC     " << metric_text(report.auroc) << "\n";
    out << "AUPR-IN   " << metric_text(report.aupr_in) << "\n";
    out << "AUPR-OUT  " << metric_text(report.aupr_out) << "\n";
}

void cmd_score(const ScoreOptions& opts, std::ostream& out) {
    const Stopwatch clock;
    const ModelBundle bundle = load_model(opts.bundle);
    if (!bundle.threshold) {
        throw ContractError("bundle '" + opts.bundle.string() +
                            "' has no rejection threshold, so unknown detection is unavailable; run `rpmnet "
                            "calibrate` first");
    }
    const CsvTable table = read_csv_table(opts.data);

    const std::set<std::string> expected(bundle.feature_names.begin(), bundle.feature_names.end());
    const std::set<std::string> present(table.header.begin(), table.header.end());
    std::vector<std::string> missing, extra;
    for (const std::string& name : bundle.feature_names)
        if (!present.contains(name)) missing.push_back(name);
    for (const std::string& name : table.header)
        if (!expected.contains(name) && name != bundle.label_column) extra.push_back(name);
    if (!missing.empty() || !extra.empty()) {
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (const auto& n : v) s += (s.empty() ? "" : ", ") + n;
            return s.empty() ? std::string("none") : s;
        };
        throw DataError("schema mismatch in '" + opts.data.string() + "': missing columns [" + join(missing) +
                        "], extra columns [" + join(extra) + "]");
    }

    std::vector<std::size_t> columns;
    for (const std::string& name : bundle.feature_names)
        columns.push_back(static_cast<std::size_t>(std::find(table.header.begin(), table.header.end(), name) -
                                                   table.header.begin()));

    std::vector<std::size_t> kept;
    Tensor raw({table.rows.size(), columns.size()});
    std::size_t dropped = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        bool ok = true;
        for (std::size_t j = 0; j < columns.size() && ok; ++j) {
            const auto v = parse_finite(table.rows[r][columns[j]]);
            if (v) raw(kept.size(), j) = *v;
            ok = v.has_value();
        }
        if (ok) kept.push_back(r);
        else ++dropped;
    }
    if (dropped > 0) log().warn("skipped {} row(s) with missing, non-numeric or non-finite features", dropped);
    Tensor features({kept.size(), columns.size()},
                    std::vector<double>(raw.data().begin(), raw.data().begin() + kept.size() * columns.size()));

    const auto scored = detect(score(apply_scaler(bundle.scaler, features), bundle.params), *bundle.threshold);

    std::ostringstream csv;
    std::vector<std::string> header = table.header;
    header.insert(header.end(), {"predicted_label", "score", "is_unknown"});
    write_csv_row(csv, header);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        std::vector<std::string> fields = table.rows[kept[i]];
        fields.push_back(bundle.params.labels[scored[i].predicted_class]);
        fields.push_back(format_double(scored[i].score));
        fields.push_back(*scored[i].is_unknown ? "true" : "false");
        write_csv_row(csv, fields);
    }
    write_text(opts.out, csv.str());

    RunManifest manifest;
    manifest.command = "score";
    manifest.started_at = utc_now();
    manifest.config = {{"tau", format_double(bundle.threshold->tau)}};
    manifest.seed = bundle.config.seed;
    manifest.input_checksums[opts.bundle.string()] = crc32_of_file(opts.bundle);
    manifest.input_checksums[opts.data.string()] = crc32_of_file(opts.data);
    manifest.outputs = {opts.out.string()};
    manifest.notes["rows_scored"] = kept.size();
    manifest.notes["rows_skipped"] = dropped;
    write_manifest(opts.out, std::move(manifest), clock);

    std::size_t unknown = 0;
    for (const auto& s : scored) unknown += *s.is_unknown ? 1 : 0;
    out << fmt::format("scored {} row(s), {} flagged unknown\n", kept.size(), unknown);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Open-set intrusion detection with reciprocal points", "rpmnet"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    TrainOptions train_opts;
    CalibrateOptions cal_opts;
    EvalOptions eval_opts;
    ScoreOptions score_opts;

    auto* train_cmd = app.add_subcommand("train", "Train a model bundle on the known classes");
    train_cmd->add_option("--data", train_opts.data, "Flow-feature CSV")->required();
    train_cmd->add_option("--roles", train_opts.roles, "Class roles JSON")->required();
    train_cmd->add_option("--config", train_opts.config, "Training config JSON");
    train_cmd->add_option("--out", train_opts.out, "Output bundle path")->required();
    train_cmd->add_option("--seed", train_opts.seed, "Overrides config seed");
    train_cmd->add_option("--epochs", train_opts.epochs, "Overrides config epochs");
    train_cmd->add_option("--batch-size", train_opts.batch_size, "Overrides config batch_size");
    train_cmd->add_option("--lr", train_opts.lr, "Overrides config lr");
    train_cmd->add_option("--alpha", train_opts.alpha, "Overrides config alpha (cross-entropy weight)");
    train_cmd->add_option("--lambda", train_opts.lambda, "Overrides config lambda (margin weight)");
    train_cmd->add_option("--beta", train_opts.beta, "Overrides config beta (Fisher weight; 0 disables)");
    train_cmd->add_option("--gamma", train_opts.gamma, "Overrides config gamma (logit scale)");
    train_cmd->add_option("--label-column", train_opts.label_column, "Overrides config label_column");

    auto* cal_cmd = app.add_subcommand("calibrate", "Fit the rejection threshold on validation unknowns");
    cal_cmd->add_option("--bundle", cal_opts.bundle, "Trained bundle")->required();
    cal_cmd->add_option("--data", cal_opts.data, "Flow-feature CSV used for training")->required();
    cal_cmd->add_option("--roles", cal_opts.roles, "Class roles JSON")->required();
    cal_cmd->add_option("--out", cal_opts.out, "New calibrated bundle path")->required();

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a calibrated bundle on the test partition");
    eval_cmd->add_option("--bundle", eval_opts.bundle, "Calibrated bundle")->required();
    eval_cmd->add_option("--data", eval_opts.data, "Flow-feature CSV used for training")->required();
    eval_cmd->add_option("--roles", eval_opts.roles, "Class roles JSON")->required();
    eval_cmd->add_option("--report", eval_opts.report, "Report JSON path")->required();

    auto* score_cmd = app.add_subcommand("score", "Classify flows and flag unknowns");
    score_cmd->add_option("--bundle", score_opts.bundle, "Calibrated bundle")->required();
    score_cmd->add_option("--data", score_opts.data, "Input CSV")->required();
    score_cmd->add_option("--out", score_opts.out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*train_cmd) cmd_train(train_opts, out);
        else if (*cal_cmd) cmd_calibrate(cal_opts, out);
        else if (*eval_cmd) cmd_eval(eval_opts, out);
        else if (*score_cmd) cmd_score(score_opts, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace rpmnet::cli
