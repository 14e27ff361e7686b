#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "repsim/analysis.hpp"
#include "repsim/dataio.hpp"
#include "repsim/error.hpp"
#include "repsim/projection.hpp"
#include "repsim/study.hpp"
#include "repsim/svcca.hpp"
#include "repsim/synth.hpp"
#include "repsim/version.hpp"

namespace py = pybind11;
using namespace repsim;

namespace {

py::dict result_dict(const SvccaResult& r) {
    py::dict d;
    d["score"] = r.score;
    d["correlations"] = r.correlations;
    d["kept_dims"] = py::make_tuple(r.kept_dims.first, r.kept_dims.second);
    d["explained_variance"] = py::make_tuple(r.explained_variance.first, r.explained_variance.second);
    return d;
}

SvccaConfig svcca_config(double variance_fraction, double epsilon) {
    SvccaConfig cfg;
    cfg.variance_fraction = variance_fraction;
    cfg.epsilon = epsilon;
    cfg.validate();
    return cfg;
}

PooledMatrix pooled_from(const Eigen::MatrixXd& features, std::vector<std::string> ids) {
    PooledMatrix p;
    p.features = features;
    p.sentence_ids = std::move(ids);
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Layer-wise representational similarity of speech and text encoders";
    m.attr("__version__") = kVersion;

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<CorruptionError>(m, "CorruptionError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
    py::register_exception<AlignmentError>(m, "AlignmentError", base.ptr());
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
    py::register_exception<ConditioningError>(m, "ConditioningError", base.ptr());
    py::register_exception<TaxonomyError>(m, "TaxonomyError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<MissingCellsError>(m, "MissingCellsError", base.ptr());

    py::class_<ActivationSet>(m, "ActivationSet")
        .def(py::init([](std::string model_id, std::string layer_tag, std::string language, std::string modality,
                         std::vector<std::string> ids, std::vector<FrameMatrix> frames) {
                 if (ids.size() != frames.size()) throw ValidationError("ids and frames differ in length");
                 ActivationSet s;
                 s.descriptor = {std::move(model_id), std::move(layer_tag), std::move(language),
                                 parse_modality(modality)};
                 s.feature_dim = frames.empty() ? 0 : static_cast<std::uint32_t>(frames.front().cols());
                 for (std::size_t i = 0; i < ids.size(); ++i) s.sentences.push_back({ids[i], std::move(frames[i])});
                 s.validate();
                 return s;
             }),
             py::arg("model_id"), py::arg("layer_tag"), py::arg("language"), py::arg("modality"), py::arg("ids"),
             py::arg("frames"))
        .def_property_readonly("model_id", [](const ActivationSet& s) { return s.descriptor.model_id; })
        .def_property_readonly("layer_tag", [](const ActivationSet& s) { return s.descriptor.layer_tag; })
        .def_property_readonly("language", [](const ActivationSet& s) { return s.descriptor.language; })
        .def_property_readonly("modality", [](const ActivationSet& s) { return std::string(to_string(s.descriptor.modality)); })
        .def_readonly("feature_dim", &ActivationSet::feature_dim)
        .def_property_readonly("ids",
                               [](const ActivationSet& s) {
                                   std::vector<std::string> ids;
                                   for (const auto& q : s.sentences) ids.push_back(q.id);
                                   return ids;
                               })
        .def_property_readonly("frames",
                               [](const ActivationSet& s) {
                                   std::vector<FrameMatrix> f;
                                   for (const auto& q : s.sentences) f.push_back(q.frames);
                                   return f;
                               })
        .def("__len__", [](const ActivationSet& s) { return s.sentences.size(); });

    m.def("read_actv", &read_activation_file, py::arg("path"), "Read an ACTV file and its sidecar");
    m.def("write_actv", &write_activation_file, py::arg("set"), py::arg("path"), "Write an ACTV file and its sidecar");
    m.def(
        "encode_actv", [](const ActivationSet& s) {
            const auto b = encode_activation_set(s);
            return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
        },
        py::arg("set"));
    m.def(
        "decode_actv", [](const py::bytes& data) {
            const std::string_view v(data);
            return decode_activation_set({reinterpret_cast<const std::uint8_t*>(v.data()), v.size()});
        },
        py::arg("data"), "Decode ACTV bytes; the descriptor is left empty");

    m.def(
        "meanpool", [](const ActivationSet& s) {
            auto p = meanpool(s);
            return py::make_tuple(std::move(p.features), std::move(p.sentence_ids));
        },
        py::arg("set"), "Mean over frames; returns (features x sentences matrix, ids)");
    m.def(
        "align",
        [](const Eigen::MatrixXd& x, std::vector<std::string> x_ids, const Eigen::MatrixXd& y,
           std::vector<std::string> y_ids, std::optional<std::size_t> cap) {
            auto [a, b] = align_pair(pooled_from(x, std::move(x_ids)), pooled_from(y, std::move(y_ids)), cap);
            return py::make_tuple(std::move(a.features), std::move(b.features), std::move(a.sentence_ids));
        },
        py::arg("x"), py::arg("x_ids"), py::arg("y"), py::arg("y_ids"), py::arg("cap") = py::none(),
        "Restrict two pooled matrices to their shared ids in sorted order");

    m.def(
        "svcca",
        [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double variance_fraction, double epsilon) {
            return result_dict(svcca_score(x, y, svcca_config(variance_fraction, epsilon)));
        },
        py::arg("x"), py::arg("y"), py::arg("variance_fraction") = 0.9, py::arg("epsilon") = 1e-10,
        "SVCCA similarity of two features x sentences matrices");

    m.def(
        "random_baseline",
        [](Eigen::Index fx, Eigen::Index fy, Eigen::Index points, std::size_t trials, std::uint64_t seed,
           std::size_t workers) {
            BaselineStats b;
            {
                py::gil_scoped_release release;
                b = random_baseline(fx, fy, points, trials, seed, {}, workers);
            }
            py::dict d;
            d["mean"] = b.mean;
            d["std"] = b.std;
            d["trials"] = b.trials;
            return d;
        },
        py::arg("fx"), py::arg("fy"), py::arg("points"), py::arg("trials") = 10, py::arg("seed") = 0,
        py::arg("workers") = 1, "SVCCA of independent Gaussian matrices");

    m.def(
        "project_2d",
        [](const Eigen::MatrixXd& data, std::vector<std::string> ids, std::vector<std::string> languages,
           std::string method, double perplexity, int iterations, double learning_rate, std::uint64_t seed) {
            const auto n = static_cast<std::size_t>(data.rows());
            if (ids.size() != n || languages.size() != n)
                throw ValidationError("ids and languages need one entry per row");
            std::vector<LabeledPoint> pts;
            for (std::size_t i = 0; i < n; ++i)
                pts.push_back({ids[i], languages[i], Modality::text, data.row(static_cast<Eigen::Index>(i)).transpose()});
            ProjectionConfig cfg;
            cfg.method = parse_projection_method(method);
            cfg.perplexity = perplexity;
            cfg.iterations = iterations;
            cfg.learning_rate = learning_rate;
            cfg.seed = seed;
            const auto r = project_2d(pts, cfg);
            Eigen::MatrixXd coords(static_cast<Eigen::Index>(n), 2);
            for (std::size_t i = 0; i < n; ++i) {
                coords(static_cast<Eigen::Index>(i), 0) = r.points[i].x;
                coords(static_cast<Eigen::Index>(i), 1) = r.points[i].y;
            }
            py::dict d;
            d["coords"] = coords;
            d["kl_initial"] = r.kl_initial;
            d["kl_final"] = r.kl_final;
            return d;
        },
        py::arg("data"), py::arg("ids"), py::arg("languages"), py::arg("method") = "tsne",
        py::arg("perplexity") = 30.0, py::arg("iterations") = 1000, py::arg("learning_rate") = 200.0, py::arg("seed") = 0,
        "2-D layout of the rows of data; coords follow the input order");
    m.def("silhouette", &silhouette, py::arg("coords"), py::arg("labels"));

    m.def("pearson", &pearson, py::arg("x"), py::arg("y"));
    m.def("pearson_p_value", &pearson_p_value, py::arg("r"), py::arg("n"));
    m.def(
        "shared_token_proportion",
        [](const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b, const std::string& mode) {
            return shared_token_proportion(a, b, parse_overlap_mode(mode));
        },
        py::arg("a"), py::arg("b"), py::arg("mode") = "jaccard");
    m.def("normalize_text_key", &normalize_text_key, py::arg("text"));
    m.def(
        "deduplicate",
        [](const std::filesystem::path& in, const std::filesystem::path& out, std::uint64_t seed) {
            const auto d = deduplicate(read_sentence_manifest(in), seed);
            write_sentence_manifest(d, out);
            std::size_t kept = 0;
            for (const auto& e : d.entries) kept += !e.is_duplicate_of.has_value();
            return kept;
        },
        py::arg("manifest"), py::arg("out"), py::arg("seed") = 0,
        "Mark duplicates in a sentence manifest; returns the number kept");

    m.def(
        "write_world",
        [](const std::string& config_json, const std::filesystem::path& out, std::size_t workers) {
            const auto cfg = synth::config_from_json(config_json);
            py::gil_scoped_release release;
            synth::write_world(cfg, out, workers);
        },
        py::arg("config_json"), py::arg("out"), py::arg("workers") = 1, "Generate a synthetic activation store");
    m.def(
        "ground_truth",
        [](const std::string& config_json) { return synth::to_json(synth::ground_truth_summary(synth::config_from_json(config_json))); },
        py::arg("config_json"), "Ground-truth statements for a synthetic world, as JSON");

    m.def(
        "run_study",
        [](const std::filesystem::path& store, const std::filesystem::path& out, std::size_t workers,
           std::uint64_t seed, std::size_t baseline_trials) {
            RunSpec spec;
            spec.store_root = store;
            spec.output_dir = out;
            spec.workers = workers;
            spec.seed = seed;
            spec.baseline_trials = baseline_trials;
            StudySummary s;
            {
                py::gil_scoped_release release;
                s = run_study(spec);
            }
            py::dict d;
            d["crossmodal_records"] = s.crossmodal_records;
            d["crosslingual_records"] = s.crosslingual_records;
            d["files"] = s.files;
            return d;
        },
        py::arg("store"), py::arg("out"), py::arg("workers") = 1, py::arg("seed") = 0, py::arg("baseline_trials") = 10,
        "Run every analysis over a store and write the result tables");
}
