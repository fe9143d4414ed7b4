#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <memory>
#include <sstream>

#include "rpmnet/bundle.hpp"
#include "rpmnet/cli.hpp"
#include "rpmnet/dataio.hpp"
#include "rpmnet/error.hpp"
#include "rpmnet/metrics.hpp"
#include "rpmnet/openset.hpp"
#include "rpmnet/train.hpp"

namespace py = pybind11;
using namespace rpmnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Tensor::matrix(rows, cols, std::vector<double>(a.data(), a.data() + a.size()));
}

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw ShapeError("expected a 1-D array, got " + std::to_string(a.ndim()) + "-D");
    return {a.data(), a.data() + a.size()};
}

py::array_t<double> to_numpy(const Tensor& t) {
    py::array_t<double> out({t.rows(), t.cols()});
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

// Owns a contiguous bool buffer; std::vector<bool> has none.
std::unique_ptr<bool[]> to_flags(const std::vector<bool>& v) {
    auto out = std::make_unique<bool[]>(v.size());
    std::copy(v.begin(), v.end(), out.get());
    return out;
}

py::dict threshold_dict(const Threshold& t) {
    py::dict d;
    d["tau"] = t.tau;
    d["method"] = t.method;
    d["validation_f1"] = t.validation_f1;
    return d;
}

class Model {
public:
    explicit Model(ModelBundle b) : bundle_(std::move(b)) {}

    static Model load(const std::string& path) { return Model(load_model(path)); }
    void save(const std::string& path) const { save_model(bundle_, path); }

    const std::vector<std::string>& labels() const { return bundle_.params.labels; }
    const std::vector<std::string>& feature_names() const { return bundle_.feature_names; }
    std::optional<double> tau() const {
        if (!bundle_.threshold) return std::nullopt;
        return bundle_.threshold->tau;
    }

    py::array_t<double> distances(const Array& x) const {
        return to_numpy(rpmnet::distances(scaled(x), bundle_.params));
    }

    py::array_t<double> embed(const Array& x) const { return to_numpy(rpmnet::embed(scaled(x), bundle_.params)); }

    py::dict score(const Array& x) const {
        auto scored = rpmnet::score(scaled(x), bundle_.params);
        if (bundle_.threshold) scored = detect(std::move(scored), *bundle_.threshold);
        const auto n = static_cast<py::ssize_t>(scored.size());
        py::array_t<std::int64_t> predicted(n);
        py::array_t<double> scores(n);
        auto* pp = predicted.mutable_data();
        auto* sp = scores.mutable_data();
        for (std::size_t i = 0; i < scored.size(); ++i) {
            pp[i] = static_cast<std::int64_t>(scored[i].predicted_class);
            sp[i] = scored[i].score;
        }
        py::dict out;
        out["predicted"] = predicted;
        out["score"] = scores;
        if (bundle_.threshold) {
            py::array_t<bool> unknown(n);
            auto* up = unknown.mutable_data();
            for (std::size_t i = 0; i < scored.size(); ++i) up[i] = *scored[i].is_unknown;
            out["is_unknown"] = unknown;
        } else {
            out["is_unknown"] = py::none();
        }
        return out;
    }

    py::dict calibrate(const Array& known, const Array& unknown) {
        const auto ks = scores_of(known), us = scores_of(unknown);
        bundle_.threshold = rpmnet::calibrate(ks, us);
        return threshold_dict(*bundle_.threshold);
    }

private:
    Tensor scaled(const Array& x) const { return apply_scaler(bundle_.scaler, to_tensor(x)); }

    std::vector<double> scores_of(const Array& x) const {
        std::vector<double> out;
        for (const auto& s : rpmnet::score(scaled(x), bundle_.params)) out.push_back(s.score);
        return out;
    }

    ModelBundle bundle_;
};

Model train_model(const Array& features, const std::vector<std::string>& labels, const py::object& config) {
    TrainConfig cfg;
    if (!config.is_none()) {
        const std::string text = py::module_::import("json").attr("dumps")(config).cast<std::string>();
        cfg = train_config_from_json(nlohmann::json::parse(text));
    }
    const Tensor raw = to_tensor(features);
    if (raw.rows() != labels.size()) {
        throw ShapeError("features have " + std::to_string(raw.rows()) + " rows but " + std::to_string(labels.size()) +
                         " labels were given");
    }
    std::vector<FlowRecord> records;
    std::vector<std::string> vocabulary;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        const auto row = raw.row(i);
        records.push_back({{row.begin(), row.end()}, labels[i]});
        if (std::find(vocabulary.begin(), vocabulary.end(), labels[i]) == vocabulary.end())
            vocabulary.push_back(labels[i]);
    }

    ModelBundle bundle;
    bundle.scaler = fit_scaler(records);
    bundle.config = cfg;
    for (std::size_t j = 0; j < raw.cols(); ++j) bundle.feature_names.push_back("f" + std::to_string(j));
    const auto scaled = apply_scaler(bundle.scaler, records);
    const TrainingSet ts = to_training_set(scaled, vocabulary, raw.cols());
    {
        py::gil_scoped_release release;
        bundle.params = train(ts, cfg).params;
    }
    return Model(std::move(bundle));
}

py::tuple run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full = {"rpmnet"};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : full) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return py::make_tuple(status, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Reciprocal-point open-set classifier for network flows";
    m.attr("__version__") = cli::kToolVersion;

    auto base = py::register_exception<Error>(m, "RpmnetError", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base);
    py::register_exception<ContractError>(m, "ContractError", base);
    py::register_exception<NonFiniteError>(m, "NonFiniteError", base);
    py::register_exception<DataError>(m, "DataError", base);
    py::register_exception<IntegrityError>(m, "IntegrityError", base);
    py::register_exception<VersionError>(m, "VersionError", base);
    py::register_exception<TrainingError>(m, "TrainingError", base);

    py::class_<Model>(m, "Model")
        .def_static("load", &Model::load, py::arg("path"))
        .def("save", &Model::save, py::arg("path"))
        .def_property_readonly("labels", &Model::labels)
        .def_property_readonly("feature_names", &Model::feature_names)
        .def_property_readonly("tau", &Model::tau, "Rejection threshold, or None before calibration.")
        .def("distances", &Model::distances, py::arg("x"))
        .def("embed", &Model::embed, py::arg("x"))
        .def("score", &Model::score, py::arg("x"),
             "Dict with predicted class indices, scores and is_unknown (None when uncalibrated).")
        .def("calibrate", &Model::calibrate, py::arg("known"), py::arg("unknown"),
             "Fits tau on raw validation features and stores it in the model.");

    m.def("train", &train_model, py::arg("features"), py::arg("labels"), py::arg("config") = py::none(),
          "Fits the scaler and network on raw features. Class order follows first appearance.");

    m.def("rp_distance", [](const Array& z, const Array& p) {
        const auto zv = to_vector(z), pv = to_vector(p);
        if (zv.size() != pv.size()) throw ShapeError("rp_distance: vectors differ in length");
        return rpmnet::rp_distance(zv, pv);
    });
    m.def(
        "auroc",
        [](const Array& scores, const std::vector<bool>& is_known, bool higher_means_known) {
            const auto s = to_vector(scores);
            const auto flags = to_flags(is_known);
            return rpmnet::auroc(s, {flags.get(), is_known.size()}, higher_means_known);
        },
        py::arg("scores"), py::arg("is_known"), py::arg("higher_means_known") = true);
    m.def(
        "aupr",
        [](const Array& scores, const std::vector<bool>& is_positive, bool higher_means_positive) {
            const auto s = to_vector(scores);
            const auto flags = to_flags(is_positive);
            return rpmnet::aupr(s, {flags.get(), is_positive.size()}, higher_means_positive);
        },
        py::arg("scores"), py::arg("is_positive"), py::arg("higher_means_positive") = true);
    m.def(
        "calibrate",
        [](const Array& known, const Array& unknown) {
            return threshold_dict(rpmnet::calibrate(to_vector(known), to_vector(unknown)));
        },
        py::arg("known_scores"), py::arg("unknown_scores"));
    m.def(
        "unknown_f1",
        [](const Array& known, const Array& unknown, double tau) {
            return rpmnet::unknown_f1(to_vector(known), to_vector(unknown), tau);
        },
        py::arg("known_scores"), py::arg("unknown_scores"), py::arg("tau"));
    m.def("run_cli", &run_cli, py::arg("args"), "Runs a CLI command in-process; returns (status, stdout, stderr).");
}
