#include "smcae/datasets.hpp"
#include "smcae/eval.hpp"
#include "smcae/experiments.hpp"
#include "smcae/hog.hpp"
#include "smcae/model.hpp"
#include "smcae/optim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace smcae;

namespace {

eval::Averaging parse_averaging(const std::string& s) {
    if (s == "macro") return eval::Averaging::macro;
    if (s == "micro") return eval::Averaging::micro;
    throw py::value_error("average must be 'macro' or 'micro'");
}

py::list stage_log(const SmcaeModel& m) {
    py::list out;
    for (const auto& st : m.training_log) {
        py::dict d;
        d["name"] = st.name;
        d["iterations"] = st.iterations;
        d["evaluations"] = st.evaluations;
        d["status"] = optim::to_string(st.status);
        std::vector<double> totals;
        for (const auto& e : st.entries) totals.push_back(e.total);
        d["objective"] = totals;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_smcae, m) {
    m.doc() = "Native core of the stacked multichannel autoencoder";
    m.attr("__version__") = exp::kVersion;

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_IOError);

    py::class_<SmcaeConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("layer_sizes", &SmcaeConfig::layer_sizes)
        .def_readwrite("gamma", &SmcaeConfig::gamma)
        .def_readwrite("max_iterations", &SmcaeConfig::max_iterations)
        .def_readwrite("tolerance", &SmcaeConfig::tolerance)
        .def_readwrite("memory", &SmcaeConfig::memory)
        .def_readwrite("fine_tune", &SmcaeConfig::fine_tune)
        .def_readwrite("seed", &SmcaeConfig::rng_seed)
        .def_property(
            "sparsity_target", [](const SmcaeConfig& c) { return c.sparsity.target; },
            [](SmcaeConfig& c, double v) { c.sparsity.target = v; })
        .def_property(
            "sparsity_weight", [](const SmcaeConfig& c) { return c.sparsity.weight; },
            [](SmcaeConfig& c, double v) { c.sparsity.weight = v; })
        .def_property(
            "weight_decay", [](const SmcaeConfig& c) { return c.sparsity.decay; },
            [](SmcaeConfig& c, double v) { c.sparsity.decay = v; });

    py::class_<SmcaeModel>(m, "Model")
        .def_property_readonly("variant", [](const SmcaeModel& s) { return std::string(to_string(s.variant)); })
        .def_property_readonly("input_dim", &SmcaeModel::input_dim)
        .def_property_readonly("layer_sizes",
                               [](const SmcaeModel& s) {
                                   std::vector<Eigen::Index> out;
                                   for (const auto& l : s.layers) out.push_back(l.hidden_dim());
                                   return out;
                               })
        .def_property_readonly("total_iterations", &SmcaeModel::total_iterations)
        .def_property_readonly("training_log", &stage_log)
        .def("transform", [](const SmcaeModel& s, const FeatureMatrix& x) { return transform(s, x); }, py::arg("x"))
        .def("save", [](const SmcaeModel& s, const std::string& path) { save_model(s, path); }, py::arg("path"));

    m.def(
        "train",
        [](const FeatureMatrix& synthetic, const FeatureMatrix& real, const SmcaeConfig& cfg,
           const std::string& variant) {
            py::gil_scoped_release nogil;
            return train_stack(synthetic, real, cfg, parse_variant(variant));
        },
        py::arg("synthetic"), py::arg("real"), py::arg("config") = SmcaeConfig{}, py::arg("variant") = "smcae",
        "Train on paired rows (row i of `synthetic` is paired with row i of `real`); features in [0, 1].");
    m.def("transform", [](const SmcaeModel& s, const FeatureMatrix& x) { return transform(s, x); },
          py::arg("model"), py::arg("x"));
    m.def("load_model", &load_model, py::arg("path"));

    py::class_<HogConfig>(m, "HogConfig")
        .def(py::init<>())
        .def_readwrite("cell_size", &HogConfig::cell_size)
        .def_readwrite("orientation_bins", &HogConfig::orientation_bins)
        .def_readwrite("block_size", &HogConfig::block_size)
        .def_readwrite("block_stride", &HogConfig::block_stride)
        .def_readwrite("signed_orientation", &HogConfig::signed_orientation);

    m.def(
        "hog", [](const Matrix& image, const HogConfig& cfg) { return hog(GrayImage(image), cfg); },
        py::arg("image"), py::arg("config") = HogConfig{}, "Descriptor of a grayscale image with values in [0, 1].");

    m.def(
        "load_optdigits",
        [](const std::string& path) {
            auto set = data::load_optdigits(path);
            return py::make_tuple(set.features, set.labels);
        },
        py::arg("path"), "Returns (counts, labels) from a preprocessed optical-digits file.");

    m.def(
        "f1_score",
        [](const eval::Labels& predicted, const eval::Labels& actual, const std::string& average) {
            return eval::f1_score(predicted, actual, parse_averaging(average));
        },
        py::arg("predicted"), py::arg("actual"), py::arg("average") = "macro");

    m.def(
        "roc_auc",
        [](const Vector& scores, const std::vector<bool>& genuine) {
            eval::ScoredPairs sp;
            sp.scores = scores;
            sp.genuine = genuine;
            const auto roc = eval::roc_and_auc(sp);
            std::vector<double> far, vr;
            for (const auto& p : roc.curve) {
                far.push_back(p.far);
                vr.push_back(p.vr);
            }
            return py::make_tuple(far, vr, roc.auc);
        },
        py::arg("scores"), py::arg("genuine"), "Returns (false accept rates, verification rates, area).");

    m.def(
        "rank1",
        [](const FeatureMatrix& queries, const FeatureMatrix& gallery, const std::vector<int>& truth) {
            return eval::rank1(queries, gallery, truth);
        },
        py::arg("queries"), py::arg("gallery"), py::arg("truth"));

    m.def(
        "svm_fit_predict",
        [](const FeatureMatrix& x, const eval::Labels& y, const FeatureMatrix& test_x, double c_box, double g_rbf) {
            py::gil_scoped_release nogil;
            return eval::svm_predict(eval::svm_train(x, y, c_box, g_rbf), test_x);
        },
        py::arg("x"), py::arg("y"), py::arg("test_x"), py::arg("c"), py::arg("g"),
        "One-vs-rest RBF SVM; returns predicted labels for `test_x`.");

    m.def(
        "gradcheck",
        [](std::uint64_t seed, double threshold) {
            const auto r = exp::run_gradcheck(seed, threshold);
            return py::make_tuple(r.passed, r.worst);
        },
        py::arg("seed") = 1, py::arg("threshold") = 1e-5, "Returns (passed, worst relative error).");
}
