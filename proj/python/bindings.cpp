#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "srcatr/classifier.hpp"
#include "srcatr/config.hpp"
#include "srcatr/dictionary.hpp"
#include "srcatr/errors.hpp"
#include "srcatr/harness.hpp"
#include "srcatr/imaging.hpp"
#include "srcatr/l1solver.hpp"

namespace py = pybind11;
using namespace srcatr;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

ShapeClass shape_class(const std::string& name) {
    const auto cls = parse_shape_class(name);
    if (!cls) throw py::value_error("unknown shape class '" + name + "'");
    return *cls;
}

// Chips cross the boundary as (height, width) float64 arrays.
RowMatrix to_array(const ImageChip& chip) {
    return Eigen::Map<const RowMatrix>(chip.pixels().data(), chip.height(), chip.width());
}

ImageChip from_array(const RowMatrix& a) {
    return ImageChip(static_cast<int>(a.cols()), static_cast<int>(a.rows()),
                     std::vector<double>(a.data(), a.data() + a.size()));
}

SolverOptions solver_options(std::optional<double> epsilon, std::optional<double> lambda_min,
                             std::optional<int> max_breakpoints) {
    SolverOptions o;
    o.epsilon = epsilon;
    o.lambda_min = lambda_min;
    o.max_breakpoints = max_breakpoints;
    return o;
}

py::dict code_dict(const SparseCode& c) {
    py::dict d;
    d["x"] = c.x;
    d["lambda_final"] = c.lambda_final;
    d["residual_norm"] = c.residual_norm;
    d["active_set"] = c.active_set;
    d["iterations"] = c.iterations;
    d["status"] = std::string(to_string(c.status));
    d["lambda_path"] = c.lambda_path;
    d["dropped_columns"] = c.dropped_columns;
    return d;
}

std::vector<std::string> class_names(std::span<const ShapeClass> classes) {
    std::vector<std::string> out;
    for (ShapeClass c : classes) out.emplace_back(to_string(c));
    return out;
}

} // namespace

PYBIND11_MODULE(_srcatr, m) {
    m.doc() = "Sparse-representation classification of synthetic sonar chips";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.attr("MAIN_CLASSES") = class_names(kMainClasses);
    m.attr("FOREIGN_CLASSES") = class_names(kForeignClasses);

    m.def(
        "generate_chip",
        [](const std::string& cls, std::uint64_t pose_seed, int width, int height) {
            return to_array(generate_chip(shape_class(cls), pose_seed, {width, height}));
        },
        py::arg("cls"), py::arg("pose_seed"), py::arg("width") = kDefaultChipSize.width,
        py::arg("height") = kDefaultChipSize.height);
    m.def(
        "add_noise",
        [](const RowMatrix& chip, double variance, std::uint64_t seed) {
            return to_array(add_noise(from_array(chip), variance, seed));
        },
        py::arg("chip"), py::arg("variance"), py::arg("seed"));
    m.def(
        "apply_blur", [](const RowMatrix& chip, double b) { return to_array(apply_blur(from_array(chip), b)); },
        py::arg("chip"), py::arg("b"));
    m.def("blur_kernel", &blur_kernel, py::arg("b"));
    m.def(
        "snr_db", [](const RowMatrix& clean, double variance) { return snr_db(from_array(clean), variance); },
        py::arg("clean"), py::arg("variance"));
    m.def(
        "vectorize",
        [](const RowMatrix& chip, int width, int height) {
            return vectorize(from_array(chip), {width, height});
        },
        py::arg("chip"), py::arg("width") = kDefaultFeatureDim.width,
        py::arg("height") = kDefaultFeatureDim.height);
    m.def(
        "write_pgm", [](const RowMatrix& chip) { return py::bytes(write_pgm(from_array(chip))); },
        py::arg("chip"));
    m.def(
        "read_pgm", [](const py::bytes& data) { return to_array(read_pgm(std::string(data))); },
        py::arg("data"));

    m.def(
        "homotopy_solve",
        [](const Eigen::MatrixXd& a, const Eigen::VectorXd& y, std::optional<double> epsilon,
           std::optional<double> lambda_min, std::optional<int> max_breakpoints) {
            return code_dict(homotopy_solve(a, y, solver_options(epsilon, lambda_min, max_breakpoints)));
        },
        py::arg("a"), py::arg("y"), py::arg("epsilon") = py::none(),
        py::arg("lambda_min") = py::none(), py::arg("max_breakpoints") = py::none());
    m.def(
        "ista_solve",
        [](const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double lambda, double tol) {
            const IstaResult r = ista_solve(a, y, lambda, tol);
            return py::make_tuple(r.x, r.objective, r.converged);
        },
        py::arg("a"), py::arg("y"), py::arg("lam"), py::arg("tol") = 1e-12);
    m.def(
        "kkt_violation",
        [](const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const Eigen::VectorXd& x,
           double lambda) { return kkt_check(a, y, x, lambda).max_violation; },
        py::arg("a"), py::arg("y"), py::arg("x"), py::arg("lam"));
    m.def("lasso_objective", [](const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& x, double lambda) {
        return lasso_objective(a, y, x, lambda);
    }, py::arg("a"), py::arg("y"), py::arg("x"), py::arg("lam"));

    py::class_<Dictionary>(m, "Dictionary")
        .def(py::init([](const std::vector<Eigen::VectorXd>& features,
                         const std::vector<std::string>& labels) {
                 std::vector<ShapeClass> cls;
                 for (const auto& l : labels) cls.push_back(shape_class(l));
                 return build_dictionary_from_features(features, cls);
             }),
             py::arg("features"), py::arg("labels"))
        .def_property_readonly("atoms", &Dictionary::atoms)
        .def_property_readonly("labels", [](const Dictionary& d) { return class_names(d.labels()); })
        .def_property_readonly("classes", [](const Dictionary& d) { return class_names(d.classes()); })
        .def("save", [](const Dictionary& d, const std::filesystem::path& p) { save_dictionary(p, d); })
        .def_static("load", &load_dictionary);

    m.def(
        "classify",
        [](const Dictionary& dict, const Eigen::VectorXd& y, std::optional<double> kappa,
           std::optional<double> epsilon, std::optional<double> lambda_min) {
            const SolverOptions opts = solver_options(
                epsilon, lambda_min ? lambda_min : std::optional(kExperimentLambdaMin), std::nullopt);
            const ClassificationResult r = kappa ? classify_with_rejection(dict, y, opts, RejectionPolicy(*kappa))
                                                 : classify(dict, y, opts);
            py::dict d;
            d["predicted"] = std::string(to_string(r.predicted));
            d["residuals"] = r.residuals;
            d["sci"] = r.sci;
            d["rejected"] = r.rejected;
            d["code"] = code_dict(r.code);
            return d;
        },
        py::arg("dictionary"), py::arg("y"), py::arg("kappa") = py::none(),
        py::arg("epsilon") = py::none(), py::arg("lambda_min") = py::none());
    m.def("sci", [](const Dictionary& d, const Eigen::VectorXd& x) { return sci(d, x); },
          py::arg("dictionary"), py::arg("x"));
    m.def(
        "nearest_neighbor",
        [](const Dictionary& d, const Eigen::VectorXd& y) {
            return std::string(to_string(nearest_neighbor_baseline(d, y)));
        },
        py::arg("dictionary"), py::arg("y"));

    m.def(
        "run_experiment",
        [](const std::string& name, const std::string& config_text,
           std::optional<std::filesystem::path> output_dir, std::optional<int> trials) {
            const auto kind = parse_experiment_kind(name);
            if (!kind) throw ConfigError("unknown experiment '" + name + "'");
            ExperimentConfig c = parse_config(config_text, *kind);
            if (trials) c.trials = *trials;
            if (output_dir) c.output_dir = *output_dir;
            ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = run_experiment(c, output_dir.has_value());
            }
            py::list points;
            for (const auto& p : r.points) {
                py::dict d;
                d["value"] = p.value;
                d["src"] = p.src.mean;
                d["src_se"] = p.src.std_error;
                d["nn"] = p.baseline.mean;
                d["nn_se"] = p.baseline.std_error;
                points.append(d);
            }
            py::dict out;
            out["points"] = points;
            out["records"] = r.records.size();
            out["files"] = r.files;
            return out;
        },
        py::arg("name"), py::arg("config") = "", py::arg("output_dir") = py::none(),
        py::arg("trials") = py::none());
}
