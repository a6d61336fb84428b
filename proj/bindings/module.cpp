#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "elastinet/dataset.hpp"
#include "elastinet/loss.hpp"
#include "elastinet/network.hpp"
#include "elastinet/training.hpp"
#include "elastinet/util.hpp"

namespace py = pybind11;
using namespace elastinet;

namespace {

std::string mode_string(NetworkArch::Mode m) {
    return m == NetworkArch::Mode::Independent ? "independent" : "shared";
}

NetworkArch::Mode mode_from(const std::string& s) {
    if (s == "independent") return NetworkArch::Mode::Independent;
    if (s == "shared") return NetworkArch::Mode::SingleShared;
    raise("unknown network mode '" + s + "'");
}

py::dict report_dict(const LossReport& rep) {
    py::dict terms;
    for (const auto& [name, value] : rep.terms) terms[py::str(name)] = value;
    py::dict out;
    out["total"] = rep.total;
    out["terms"] = terms;
    return out;
}

py::dict scales_dict(const NormalizationRecord& rec) {
    py::dict d;
    for (const auto& [col, s] : rec.scales) d[py::str(col)] = s;
    return d;
}

}  // namespace

PYBIND11_MODULE(_elastinet, m) {
    m.doc() = "physics-informed neural networks for plane-strain elasticity";

    py::register_exception<Error>(m, "ElastinetError", PyExc_RuntimeError);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("rows", &Dataset::rows)
        .def_property_readonly("columns",
                               [](const Dataset& d) { return d.columns; })
        .def("column", [](const Dataset& d, const std::string& name) { return d.col(name); },
             py::arg("name"))
        .def_property_readonly("mode", [](const Dataset& d) { return to_string(d.mode); })
        .def_property_readonly("problem", [](const Dataset& d) { return to_string(d.problem); })
        .def_readonly("lam", &Dataset::lambda)
        .def_readonly("mu", &Dataset::mu)
        .def_readonly("sigma_y", &Dataset::sigma_y)
        .def_property_readonly("normalization",
                               [](const Dataset& d) { return scales_dict(d.normalization); })
        .def("save", [](const Dataset& d, const std::string& path) { save_dataset(d, path); },
             py::arg("path"))
        .def("normalize", [](const Dataset& d) {
            auto [scaled, rec] = normalize(d);
            return py::make_tuple(scaled, scales_dict(rec));
        });

    m.def("load_dataset", &load_dataset, py::arg("path"));
    m.def(
        "generate_elastic_dataset",
        [](int nx, int ny, double lam, double mu, double q, const std::string& mode) {
            GridSpec spec;
            spec.n_x = nx;
            spec.n_y = ny;
            return generate_elastic_dataset(spec, lam, mu, q, data_mode_from_string(mode));
        },
        py::arg("nx"), py::arg("ny"), py::arg("lam"), py::arg("mu"), py::arg("q") = 4.0,
        py::arg("mode") = "force");
    m.def(
        "generate_plastic_dataset",
        [](int nx, int ny, double lam, double mu, double sigma_y, double exx, double eyy,
           double exy) {
            GridSpec spec;
            spec.n_x = nx;
            spec.n_y = ny;
            return generate_plastic_dataset(spec, lam, mu, sigma_y, exx, eyy, exy);
        },
        py::arg("nx"), py::arg("ny"), py::arg("lam"), py::arg("mu"), py::arg("sigma_y"),
        py::arg("exx"), py::arg("eyy"), py::arg("exy"));
    m.def("central_difference_forces", &central_difference_forces, py::arg("stress_data"));

    py::class_<MaterialParams>(m, "MaterialParams")
        .def(py::init([](double lam, double mu, std::optional<double> sigma_y,
                         bool lam_trainable, bool mu_trainable, bool sigma_y_trainable) {
                 MaterialParams p;
                 p.lambda = lam;
                 p.mu = mu;
                 p.sigma_y = sigma_y;
                 p.lambda_trainable = lam_trainable;
                 p.mu_trainable = mu_trainable;
                 p.sigma_y_trainable = sigma_y_trainable;
                 return p;
             }),
             py::arg("lam") = 1.0, py::arg("mu") = 0.5, py::arg("sigma_y") = py::none(),
             py::arg("lam_trainable") = false, py::arg("mu_trainable") = false,
             py::arg("sigma_y_trainable") = false)
        .def_readwrite("lam", &MaterialParams::lambda)
        .def_readwrite("mu", &MaterialParams::mu)
        .def_readwrite("sigma_y", &MaterialParams::sigma_y)
        .def_readwrite("lam_trainable", &MaterialParams::lambda_trainable)
        .def_readwrite("mu_trainable", &MaterialParams::mu_trainable)
        .def_readwrite("sigma_y_trainable", &MaterialParams::sigma_y_trainable);

    py::class_<NetworkArch>(m, "NetworkArch")
        .def(py::init([](int layers, int neurons, const std::string& activation,
                         const std::string& mode) {
                 NetworkArch a;
                 a.layers = layers;
                 a.neurons = neurons;
                 a.activation = activation_from_string(activation);
                 a.mode = mode_from(mode);
                 return a;
             }),
             py::arg("layers") = 5, py::arg("neurons") = 20, py::arg("activation") = "tanh",
             py::arg("mode") = "independent")
        .def_readwrite("layers", &NetworkArch::layers)
        .def_readwrite("neurons", &NetworkArch::neurons)
        .def_property(
            "activation",
            [](const NetworkArch& a) { return std::string(activation_name(a.activation)); },
            [](NetworkArch& a, const std::string& s) { a.activation = activation_from_string(s); })
        .def_property(
            "mode", [](const NetworkArch& a) { return mode_string(a.mode); },
            [](NetworkArch& a, const std::string& s) { a.mode = mode_from(s); });

    py::class_<FieldModel>(m, "FieldModel")
        .def_readonly("fields", &FieldModel::fields)
        .def_readonly("inputs", &FieldModel::inputs)
        .def_property_readonly("parameter_count", &FieldModel::parameter_count)
        .def("forward", [](const FieldModel& f, const std::vector<double>& x) {
            return f.forward_values(x);
        }, py::arg("point"));

    m.def("build_model", &build_field_model, py::arg("fields"), py::arg("arch"),
          py::arg("inputs") = std::vector<std::string>{"x", "y"}, py::arg("seed") = 0);

    m.def(
        "loss_report",
        [](const FieldModel& model, const MaterialParams& material, const Dataset& data,
           double flow_coefficient, bool clipped_consistency) {
            LossOptions opts;
            opts.problem = data.problem;
            opts.surrogate_mu = model.inputs.size() == 3;
            opts.flow_coefficient = flow_coefficient;
            opts.clipped_consistency = clipped_consistency;
            LossProgram prog(model, material, data.normalization, opts);
            return report_dict(prog.evaluate(data));
        },
        py::arg("model"), py::arg("material"), py::arg("data"),
        py::arg("flow_coefficient") = 1.5, py::arg("clipped_consistency") = false);

    py::class_<EpochRecord>(m, "EpochRecord")
        .def_readonly("epoch", &EpochRecord::epoch)
        .def_readonly("total_loss", &EpochRecord::total_loss)
        .def_readonly("terms", &EpochRecord::terms)
        .def_readonly("lam", &EpochRecord::lambda)
        .def_readonly("mu", &EpochRecord::mu)
        .def_readonly("sigma_y", &EpochRecord::sigma_y)
        .def_readonly("seconds", &EpochRecord::seconds);

    py::class_<TrainingHistory>(m, "TrainingHistory")
        .def_readonly("term_names", &TrainingHistory::term_names)
        .def_readonly("epochs", &TrainingHistory::epochs)
        .def_readonly("initial_loss", &TrainingHistory::initial_loss)
        .def_readonly("best_epoch", &TrainingHistory::best_epoch)
        .def_readonly("best_loss", &TrainingHistory::best_loss)
        .def_readonly("initial_loss_ratio", &TrainingHistory::initial_loss_ratio)
        .def_readonly("abort_reason", &TrainingHistory::abort_reason)
        .def("csv", &history_csv);

    py::class_<TrainingConfig>(m, "TrainingConfig")
        .def(py::init([](const std::string& mode, int epochs, int patience, int batch, double lr,
                         std::uint64_t seed) {
                 TrainingConfig c;
                 c.mode = train_mode_from_string(mode);
                 c.max_epochs = epochs;
                 c.patience = patience;
                 c.batch_size = batch;
                 c.learning_rate = lr;
                 c.seed = seed;
                 return c;
             }),
             py::arg("mode") = "solve", py::arg("epochs") = 10000, py::arg("patience") = 500,
             py::arg("batch") = 64, py::arg("lr") = 1e-3, py::arg("seed") = 0)
        .def_property(
            "mode", [](const TrainingConfig& c) { return std::string(train_mode_name(c.mode)); },
            [](TrainingConfig& c, const std::string& s) { c.mode = train_mode_from_string(s); })
        .def_readwrite("epochs", &TrainingConfig::max_epochs)
        .def_readwrite("patience", &TrainingConfig::patience)
        .def_readwrite("batch", &TrainingConfig::batch_size)
        .def_readwrite("lr", &TrainingConfig::learning_rate)
        .def_readwrite("seed", &TrainingConfig::seed);

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_readonly("model", &Checkpoint::model)
        .def_readonly("material", &Checkpoint::material)
        .def_readonly("seed", &Checkpoint::seed)
        .def_property_readonly("normalization",
                               [](const Checkpoint& c) { return scales_dict(c.normalization); })
        .def("save", [](const Checkpoint& c, const std::string& path) { save_checkpoint(c, path); },
             py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("history", &TrainResult::history)
        .def_readonly("best", &TrainResult::best);

    m.def("train", &train, py::arg("model"), py::arg("material"), py::arg("data"),
          py::arg("config"));
    m.def(
        "retrain",
        [](const Checkpoint& ckpt, const Dataset& data, const TrainingConfig& cfg) {
            return retrain(ckpt, data, cfg);
        },
        py::arg("checkpoint"), py::arg("data"), py::arg("config"));
    m.def("train_surrogate", &train_surrogate, py::arg("parts"), py::arg("arch"),
          py::arg("material"), py::arg("config"));
}
