#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpmnet/bundle.hpp"
#include "rpmnet/cli.hpp"
#include "rpmnet/dataio.hpp"
#include "rpmnet/synthetic.hpp"
#include "tempdir.hpp"

using namespace rpmnet;

namespace {

struct Result {
    int status;
    std::string out;
    std::string err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "rpmnet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {status, out.str(), err.str()};
}

// Three well separated known classes and an unknown cluster at their centroid.
struct Fixture {
    TempDir dir;
    std::string data, roles, config;

    Fixture() {
        const auto means = synthetic::axis_means(3, 4, 3.0);
        const std::vector<double> centre = {1.0, 1.0, 1.0, 0.0};
        const std::vector<synthetic::Blob> blobs = {
            {"web", means[0], 0.2, 60},    {"dns", means[1], 0.2, 40},      {"ssh", means[2], 0.2, 30},
            {"scan", centre, 0.2, 25},     {"worm", centre, 0.2, 25},
        };
        synthetic::write_flows((dir / "flows.csv").string(), synthetic::sample(blobs, 9));
        data = (dir / "flows.csv").string();
        roles = dir.write("roles.json",
                          R"({"known": ["web", "dns", "ssh"], "validation_unknown": ["scan"], "test_unknown": ["worm"]})")
                    .string();
        config = dir.write("config.json", R"({"epochs": 100, "batch_size": 32, "hidden_dims": [32, 16], "embed_dim": 8})")
                     .string();
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    Result train(const std::string& out, const std::vector<std::string>& extra = {}) const {
        std::vector<std::string> args = {"train", "--data", data, "--roles", roles, "--config", config, "--out", out};
        args.insert(args.end(), extra.begin(), extra.end());
        return run_cli(args);
    }
    Result calibrate(const std::string& bundle, const std::string& out) const {
        return run_cli({"calibrate", "--bundle", bundle, "--data", data, "--roles", roles, "--out", out});
    }
};

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n' ? 1 : 0;
    return n;
}

}  // namespace

TEST_CASE("train writes bundle, history and manifest") {
    Fixture f;
    const Result r = f.train(f.path("m.bin"));
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(std::filesystem::exists(f.path("m.bin")));
    CHECK(count_lines(read_file(f.path("m.bin.history.tsv"))) == 101);
    const auto manifest = nlohmann::json::parse(read_file(f.path("m.bin.manifest.json")));
    CHECK(manifest["command"] == "train");
    CHECK(manifest["config"]["epochs"] == 100);
    CHECK(manifest["seed"] == 42);
    CHECK(manifest["inputs_crc32"].contains(f.data));
}

TEST_CASE("flags override the config file") {
    Fixture f;
    const Result r = f.train(f.path("m.bin"), {"--epochs", "2", "--seed", "7", "--beta", "0"});
    REQUIRE_MESSAGE(r.status == 0, r.err);
    const auto manifest = nlohmann::json::parse(read_file(f.path("m.bin.manifest.json")));
    CHECK(manifest["config"]["epochs"] == 2);
    CHECK(manifest["config"]["beta"] == 0.0);
    CHECK(manifest["seed"] == 7);
}

TEST_CASE("same seed gives byte-identical bundles") {
    Fixture f;
    REQUIRE(f.train(f.path("a.bin"), {"--epochs", "3"}).status == 0);
    REQUIRE(f.train(f.path("b.bin"), {"--epochs", "3"}).status == 0);
    CHECK(read_file(f.path("a.bin")) == read_file(f.path("b.bin")));
    CHECK(read_file(f.path("a.bin.history.tsv")) == read_file(f.path("b.bin.history.tsv")));
}

TEST_CASE("invalid roles config names the offending class") {
    Fixture f;
    const std::string roles = f.dir.write("bad.json", R"({"known": ["web", "dns", "ssh"], "test_unknown": ["worm"]})").string();
    const Result r = run_cli({"train", "--data", f.data, "--roles", roles, "--out", f.path("m.bin")});
    CHECK(r.status != 0);
    CHECK(r.err.find("scan") != std::string::npos);
    CHECK(!std::filesystem::exists(f.path("m.bin")));
}

TEST_CASE("calibrate, eval and score on separated clusters") {
    Fixture f;
    REQUIRE(f.train(f.path("m.bin")).status == 0);

    const Result cal = f.calibrate(f.path("m.bin"), f.path("c.bin"));
    REQUIRE_MESSAGE(cal.status == 0, cal.err);
    const ModelBundle calibrated = load_model(f.path("c.bin"));
    REQUIRE(calibrated.threshold.has_value());
    CHECK(calibrated.threshold->validation_f1 == 1.0);
    CHECK(!load_model(f.path("m.bin")).threshold.has_value());

    const Result again = f.calibrate(f.path("c.bin"), f.path("c2.bin"));
    REQUIRE(again.status == 0);
    const auto manifest = nlohmann::json::parse(read_file(f.path("c2.bin.manifest.json")));
    CHECK(manifest["notes"].contains("supersedes"));

    const Result ev = run_cli({"eval", "--bundle", f.path("c.bin"), "--data", f.data, "--roles", f.roles, "--report",
                               f.path("report.json")});
    REQUIRE_MESSAGE(ev.status == 0, ev.err);
    for (const char* key : {"Precision", "Recall", "F1-Score", "AUROC", "AUPR-IN", "AUPR-OUT"})
        CHECK(ev.out.find(key) != std::string::npos);
    const auto report = nlohmann::json::parse(read_file(f.path("report.json")));
    CHECK(report["F1-Score"].get<double>() > 0.9);

    // Rows from the known clusters only.
    const FlowDataset all = load_csv(f.data, CsvSchema{});
    FlowDataset known;
    known.feature_names = all.feature_names;
    for (const auto& r : all.records)
        if (r.label == "web" || r.label == "dns" || r.label == "ssh") known.records.push_back(r);
    write_csv(f.path("known.csv"), known, "Label");
    const Result sc = run_cli({"score", "--bundle", f.path("c.bin"), "--data", f.path("known.csv"), "--out", f.path("s1.csv")});
    REQUIRE_MESSAGE(sc.status == 0, sc.err);
    const CsvTable scored = read_csv_table(f.path("s1.csv"));
    CHECK(scored.header.back() == "is_unknown");
    CHECK(scored.rows.size() == known.records.size());
    for (const auto& row : scored.rows) CHECK(row.back() == "false");

    REQUIRE(run_cli({"score", "--bundle", f.path("c.bin"), "--data", f.path("known.csv"), "--out", f.path("s2.csv")}).status == 0);
    CHECK(read_file(f.path("s1.csv")) == read_file(f.path("s2.csv")));

    f.dir.write("empty.csv", "f0,f1,f2,f3\n");
    const Result empty = run_cli({"score", "--bundle", f.path("c.bin"), "--data", f.path("empty.csv"), "--out", f.path("e.csv")});
    REQUIRE_MESSAGE(empty.status == 0, empty.err);
    CHECK(read_file(f.path("e.csv")) == "f0,f1,f2,f3,predicted_label,score,is_unknown\n");

    f.dir.write("wrong.csv", "f0,f1,f3,extra\n1,2,3,4\n");
    const Result wrong = run_cli({"score", "--bundle", f.path("c.bin"), "--data", f.path("wrong.csv"), "--out", f.path("w.csv")});
    CHECK(wrong.status != 0);
    CHECK(wrong.err.find("missing columns [f2]") != std::string::npos);
    CHECK(wrong.err.find("extra columns [extra]") != std::string::npos);
}

TEST_CASE("uncalibrated bundles are refused by eval and score") {
    Fixture f;
    REQUIRE(f.train(f.path("m.bin"), {"--epochs", "1"}).status == 0);
    const Result ev = run_cli({"eval", "--bundle", f.path("m.bin"), "--data", f.data, "--roles", f.roles, "--report",
                               f.path("r.json")});
    CHECK(ev.status != 0);
    CHECK(ev.err.find("calibrate") != std::string::npos);
    const Result sc = run_cli({"score", "--bundle", f.path("m.bin"), "--data", f.data, "--out", f.path("s.csv")});
    CHECK(sc.status != 0);
    CHECK(sc.err.find("calibrate") != std::string::npos);
}

TEST_CASE("calibrate refuses in-place writes and missing validation unknowns") {
    Fixture f;
    REQUIRE(f.train(f.path("m.bin"), {"--epochs", "1"}).status == 0);
    CHECK(f.calibrate(f.path("m.bin"), f.path("m.bin")).status != 0);

    const std::string roles =
        f.dir.write("noval.json", R"({"known": ["web", "dns", "ssh"], "excluded": ["scan"], "test_unknown": ["worm"]})").string();
    const Result r = run_cli({"calibrate", "--bundle", f.path("m.bin"), "--data", f.data, "--roles", roles, "--out",
                              f.path("c.bin")});
    CHECK(r.status != 0);
    CHECK(r.err.find("noval.json") != std::string::npos);
}

TEST_CASE("usage errors") {
    const Result missing = run_cli({"eval", "--data", "x.csv", "--roles", "r.json", "--report", "o.json"});
    CHECK(missing.status != 0);
    CHECK(missing.err.find("--bundle") != std::string::npos);
    CHECK(run_cli({}).status != 0);

    TempDir dir;
    const Result absent = run_cli({"eval", "--bundle", (dir / "none.bin").string(), "--data", "x.csv", "--roles", "r.json",
                                   "--report", (dir / "o.json").string()});
    CHECK(absent.status != 0);
    CHECK(absent.err.find("none.bin") != std::string::npos);
}

TEST_CASE("shipped fixture trains with the quick config") {
    const std::string src = RPMNET_SOURCE_DIR;
    const std::string data = src + "/fixtures/synthetic_flows.csv";
    REQUIRE(std::filesystem::exists(data));
    TempDir dir;
    const Result r = run_cli({"train", "--data", data, "--roles", src + "/fixtures/synthetic_roles.json", "--config",
                              src + "/fixtures/quick_config.json", "--out", (dir / "m.bin").string()});
    REQUIRE_MESSAGE(r.status == 0, r.err);
    CHECK(count_lines(read_file(dir / "m.bin.history.tsv")) == 4);
}
