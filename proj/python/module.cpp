#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "striatum/classifiers.hpp"
#include "striatum/cli.hpp"
#include "striatum/crossval.hpp"
#include "striatum/error.hpp"
#include "striatum/ingest.hpp"
#include "striatum/metrics.hpp"
#include "striatum/model_io.hpp"
#include "striatum/nifti.hpp"
#include "striatum/phantom.hpp"
#include "striatum/report.hpp"
#include "striatum/tpe.hpp"

namespace py = pybind11;
using namespace striatum;

namespace {

using Images = py::array_t<double, py::array::c_style | py::array::forcecast>;

ModelFamily family_arg(const std::string& name) {
    const auto f = parse_family(name);
    if (!f) throw InvalidArgument("unknown model family '" + name + "'");
    return *f;
}

PreprocTag preproc_arg(const std::string& name) {
    const auto t = parse_preproc(name);
    if (!t) throw InvalidArgument("unknown preprocessing '" + name + "'");
    return *t;
}

ClassLabel label_arg(const std::string& name) {
    const auto l = parse_label(name);
    if (!l) throw InvalidArgument("unknown label '" + name + "'");
    return *l;
}

// (n, rows, cols) array in [0, 1] plus labels -> samples.
std::vector<LabeledSample> samples_from(const Images& images, const std::vector<std::string>& labels,
                                        const std::string& preproc) {
    if (images.ndim() != 3) throw InvalidArgument("images must have shape (n, rows, cols)");
    const auto n = static_cast<std::size_t>(images.shape(0));
    if (labels.size() != n) throw InvalidArgument("need one label per image");
    const auto rows = static_cast<std::size_t>(images.shape(1)), cols = static_cast<std::size_t>(images.shape(2));
    const PreprocTag tag = preproc_arg(preproc);
    std::vector<LabeledSample> out(n);
    const double* p = images.data();
    for (std::size_t i = 0; i < n; ++i) {
        out[i].image.rows = rows;
        out[i].image.cols = cols;
        out[i].image.preproc = tag;
        out[i].image.source_id = "image-" + std::to_string(i);
        out[i].image.pixels.assign(p + i * rows * cols, p + (i + 1) * rows * cols);
        out[i].image.validate();
        out[i].label = label_arg(labels[i]);
        out[i].role = role_for(out[i].label);
    }
    return out;
}

Images images_of(const std::vector<LabeledSample>& samples) {
    const std::size_t rows = samples.empty() ? kSliceRows : samples[0].image.rows;
    const std::size_t cols = samples.empty() ? kSliceCols : samples[0].image.cols;
    Images a({samples.size(), rows, cols});
    double* out = a.mutable_data();
    for (std::size_t i = 0; i < samples.size(); ++i)
        std::copy(samples[i].image.pixels.begin(), samples[i].image.pixels.end(), out + i * rows * cols);
    return a;
}

std::vector<std::string> labels_of(const std::vector<LabeledSample>& samples) {
    std::vector<std::string> out;
    for (const auto& s : samples) out.emplace_back(to_string(s.label));
    return out;
}

py::object parse_json(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

TrainConfig config_arg(ModelFamily family, std::uint64_t seed, std::optional<std::size_t> epochs,
                       std::optional<double> learning_rate) {
    TrainConfig cfg = TrainConfig::defaults(family);
    cfg.seed = seed;
    if (epochs) cfg.max_epochs = *epochs;
    if (learning_rate) cfg.learning_rate = *learning_rate;
    cfg.validate();
    return cfg;
}

ParamSpace space_arg(const py::list& dims) {
    ParamSpace s;
    for (const auto& item : dims) {
        const auto d = item.cast<py::dict>();
        const auto name = d["name"].cast<std::string>();
        const auto kind = d["kind"].cast<std::string>();
        if (kind == "uniform")
            s.dims.push_back(Dimension::uniform(name, d["low"].cast<double>(), d["high"].cast<double>()));
        else if (kind == "log_uniform")
            s.dims.push_back(Dimension::log_uniform(name, d["low"].cast<double>(), d["high"].cast<double>()));
        else if (kind == "integer")
            s.dims.push_back(Dimension::integer(name, d["low"].cast<std::int64_t>(), d["high"].cast<std::int64_t>()));
        else if (kind == "categorical")
            s.dims.push_back(Dimension::categorical(name, d["choices"].cast<std::vector<std::string>>()));
        else
            throw InvalidArgument("unknown dimension kind '" + kind + "'");
    }
    s.validate();
    return s;
}

py::dict assignment_dict(const Assignment& a) {
    py::dict d;
    for (const auto& [k, v] : a) std::visit([&, &key = k](const auto& x) { d[py::str(key)] = x; }, v);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bindings for the striatum C++ library";

    // Translators run newest first, so the base class goes in first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

    m.def(
        "generate_phantoms",
        [](const std::string& cls, std::size_t n, std::uint64_t seed, double noise_sigma, double severity) {
            PhantomConfig c;
            c.cls = cls == "normal" ? PhantomClass::NormalLike
                    : cls == "pd"   ? PhantomClass::PDLike
                    : cls == "swedd" ? PhantomClass::SweddLike
                                     : throw InvalidArgument("class must be normal, pd or swedd");
            c.n = n;
            c.seed = seed;
            c.noise_sigma = noise_sigma;
            c.severity = severity;
            const auto samples = to_labeled(generate(c));
            return py::make_tuple(images_of(samples), labels_of(samples));
        },
        py::arg("cls"), py::arg("n"), py::arg("seed") = 0, py::arg("noise_sigma") = 0.02, py::arg("severity") = 0.7,
        "Peak-slice phantoms as ((n, 109, 91) images in [0, 1], labels).");

    m.def(
        "read_nifti",
        [](const std::filesystem::path& path) {
            const Volume v = read_nifti(path);
            py::array_t<std::uint16_t> a({v.nz, v.ny, v.nx});
            std::copy(v.voxels.begin(), v.voxels.end(), a.mutable_data());
            return a;
        },
        py::arg("path"), "Voxels as a (z, y, x) uint16 array, clamped to [0, 32767].");

    m.def(
        "write_nifti",
        [](py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast> voxels, const std::filesystem::path& path,
           const std::string& datatype, bool big_endian) {
            if (voxels.ndim() != 3) throw InvalidArgument("voxels must have shape (z, y, x)");
            Volume v(static_cast<std::size_t>(voxels.shape(2)), static_cast<std::size_t>(voxels.shape(1)),
                     static_cast<std::size_t>(voxels.shape(0)));
            std::copy(voxels.data(), voxels.data() + voxels.size(), v.voxels.begin());
            const NiftiDatatype dt = datatype == "uint8"     ? NiftiDatatype::UInt8
                                     : datatype == "int16"   ? NiftiDatatype::Int16
                                     : datatype == "float32" ? NiftiDatatype::Float32
                                                             : throw InvalidArgument("datatype must be uint8, int16 or float32");
            write_nifti(v, path, dt, big_endian ? Endian::Big : Endian::Little);
        },
        py::arg("voxels"), py::arg("path"), py::arg("datatype") = "int16", py::arg("big_endian") = false);

    m.def(
        "load_manifest",
        [](const std::filesystem::path& manifest, const std::string& preproc) {
            const Dataset ds = load_dataset(read_manifest(manifest), preproc_arg(preproc));
            return py::make_tuple(images_of(ds.samples), labels_of(ds.samples));
        },
        py::arg("manifest"), py::arg("preproc") = "single", "Normalized slices and labels for every manifest row.");

    m.def(
        "metrics_from_confusion",
        [](std::size_t tp, std::size_t fn, std::size_t fp, std::size_t tn) {
            const RatioMetrics r = metrics_from_confusion({tp, fn, fp, tn});
            py::dict d;
            d["accuracy"] = r.accuracy;
            d["precision"] = r.precision;
            d["recall"] = r.recall;
            d["specificity"] = r.specificity;
            return d;
        },
        py::arg("tp"), py::arg("fn"), py::arg("fp"), py::arg("tn"));
    m.def(
        "auc", [](const std::vector<double>& s, const std::vector<int>& p) { return auc(s, p); }, py::arg("scores"),
        py::arg("positive"));
    m.def(
        "average_precision",
        [](const std::vector<double>& s, const std::vector<int>& p) { return average_precision(s, p); },
        py::arg("scores"), py::arg("positive"));
    m.def(
        "stratified_kfold",
        [](const std::vector<std::string>& labels, std::size_t k, std::uint64_t seed) {
            std::vector<ClassLabel> l;
            for (const auto& s : labels) l.push_back(label_arg(s));
            return stratified_kfold(l, k, seed).assignment;
        },
        py::arg("labels"), py::arg("k") = 10, py::arg("seed") = 0, "Fold index per sample.");

    py::class_<TrainedModel>(m, "Model")
        .def_property_readonly("family", [](const TrainedModel& t) { return std::string(to_string(t.spec.family)); })
        .def_property_readonly("preproc", [](const TrainedModel& t) { return std::string(to_string(t.preproc)); })
        .def_property_readonly("epochs_run", [](const TrainedModel& t) { return t.meta.epochs_run; })
        .def_property_readonly("loss_history", [](const TrainedModel& t) { return t.meta.loss_history; })
        .def(
            "score",
            [](const TrainedModel& t, const Images& images) {
                std::vector<std::string> labels(static_cast<std::size_t>(images.ndim() == 3 ? images.shape(0) : 0), "normal");
                const auto samples = samples_from(images, labels, std::string(to_string(t.preproc)));
                std::vector<double> out;
                for (const auto& s : samples) out.push_back(score(t, s.image));
                return out;
            },
            py::arg("images"), "Probability of pd (cnn, mlp, logreg) or signed margin (svm).")
        .def(
            "predict",
            [](const TrainedModel& t, const Images& images) {
                std::vector<std::string> labels(static_cast<std::size_t>(images.ndim() == 3 ? images.shape(0) : 0), "normal");
                const auto samples = samples_from(images, labels, std::string(to_string(t.preproc)));
                std::vector<std::string> out;
                for (const auto& s : samples) out.emplace_back(to_string(predict(t, s.image)));
                return out;
            },
            py::arg("images"))
        .def("save", [](const TrainedModel& t, const std::filesystem::path& p) { save_model(t, p); }, py::arg("path"));

    m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"));

    m.def(
        "train",
        [](const std::string& family, const Images& images, const std::vector<std::string>& labels, std::uint64_t seed,
           std::optional<std::size_t> epochs, std::optional<double> learning_rate, const std::string& preproc) {
            const ModelFamily f = family_arg(family);
            const auto data = samples_from(images, labels, preproc);
            py::gil_scoped_release release;
            return fit(ModelSpec::defaults(f, seed), config_arg(f, seed, epochs, learning_rate), data);
        },
        py::arg("family"), py::arg("images"), py::arg("labels"), py::arg("seed") = 0, py::arg("epochs") = py::none(),
        py::arg("learning_rate") = py::none(), py::arg("preproc") = "single",
        "Fit the default architecture of a family (cnn, mlp, logreg, svm).");

    m.def(
        "crossval",
        [](const std::string& family, const Images& images, const std::vector<std::string>& labels, std::size_t k,
           std::uint64_t seed, std::optional<std::size_t> epochs, std::size_t jobs, const std::string& preproc) {
            const ModelFamily f = family_arg(family);
            const auto data = samples_from(images, labels, preproc);
            std::vector<ClassLabel> l;
            for (const auto& s : data) l.push_back(s.label);
            std::string text;
            {
                py::gil_scoped_release release;
                const EvalReport r = crossval(ModelSpec::defaults(f, seed), config_arg(f, seed, epochs, std::nullopt), data,
                                              stratified_kfold(l, k, seed), jobs);
                text = report_json(r, current_timestamp());
            }
            return parse_json(text);
        },
        py::arg("family"), py::arg("images"), py::arg("labels"), py::arg("k") = 10, py::arg("seed") = 0,
        py::arg("epochs") = py::none(), py::arg("jobs") = 1, py::arg("preproc") = "single",
        "Pooled k-fold evaluation report as a dict (same schema as the report JSON file).");

    m.def(
        "optimize",
        [](const std::function<double(py::dict)>& objective, const py::list& space, std::size_t budget, std::uint64_t seed,
           std::size_t n_startup, double gamma, std::size_t n_candidates) {
            TpeConfig cfg{n_startup, gamma, n_candidates, seed};
            const OptimizeResult r =
                optimize([&](const Assignment& a) { return objective(assignment_dict(a)); }, space_arg(space), budget, cfg);
            py::list history;
            for (const auto& t : r.history) {
                py::dict d;
                d["id"] = t.id;
                d["assignment"] = assignment_dict(t.assignment);
                d["objective"] = t.objective;
                d["status"] = t.status == TrialStatus::Complete ? "complete" : "failed";
                history.append(d);
            }
            return py::make_tuple(assignment_dict(r.best.assignment), *r.best.objective, history);
        },
        py::arg("objective"), py::arg("space"), py::arg("budget"), py::arg("seed") = 0, py::arg("n_startup") = 10,
        py::arg("gamma") = 0.25, py::arg("n_candidates") = 24,
        "Minimize objective(assignment) with TPE. Space entries are dicts with name, kind "
        "(uniform, log_uniform, integer, categorical) and low/high or choices. Returns (best, objective, history).");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command line in-process; returns (exit_code, stdout, stderr).");
}
