#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dsrfoc/expr.hpp"
#include "dsrfoc/foc.hpp"
#include "dsrfoc/harness.hpp"
#include "dsrfoc/machine.hpp"
#include "dsrfoc/metrics.hpp"
#include "dsrfoc/train.hpp"
#include "dsrfoc/transforms.hpp"

namespace py = pybind11;
using namespace dsrfoc;

namespace {

py::dict timeseries_to_dict(const Timeseries& ts) {
    const std::size_t n = ts.points.size();
    py::dict out;
    auto column = [&](const char* name, double TimePoint::*field) {
        py::array_t<double> arr(static_cast<py::ssize_t>(n));
        auto view = arr.mutable_unchecked<1>();
        for (std::size_t i = 0; i < n; ++i) view(static_cast<py::ssize_t>(i)) = ts.points[i].*field;
        out[name] = std::move(arr);
    };
    column("t", &TimePoint::t);
    column("omega_ref", &TimePoint::omega_ref);
    column("omega_r", &TimePoint::omega_r);
    column("ids_ref", &TimePoint::ids_ref);
    column("ids", &TimePoint::ids);
    column("iqs_ref", &TimePoint::iqs_ref);
    column("iqs", &TimePoint::iqs);
    column("lam_dr", &TimePoint::lam_dr);
    column("vd_ref", &TimePoint::vd_ref);
    column("vq_ref", &TimePoint::vq_ref);
    column("Te", &TimePoint::Te);
    column("T_load", &TimePoint::T_load);
    column("x1", &TimePoint::x1);
    column("x2", &TimePoint::x2);
    column("x3", &TimePoint::x3);
    column("x4", &TimePoint::x4);
    column("theta_e", &TimePoint::theta_e);
    column("omega_e", &TimePoint::omega_e);
    return out;
}

}  // namespace

PYBIND11_MODULE(dsrfoc, m) {
    m.doc() = "Induction-machine field-oriented control laboratory";

    py::register_exception<expr::ParseError>(m, "ExpressionParseError");
    py::register_exception<SimulationError>(m, "SimulationDivergedError");

    py::class_<MachineParams>(m, "MachineParams")
        .def(py::init(&MachineParams::table1))
        .def_static("table1", &MachineParams::table1)
        .def_readwrite("Rs", &MachineParams::Rs)
        .def_readwrite("Rr", &MachineParams::Rr)
        .def_readwrite("Ls", &MachineParams::Ls)
        .def_readwrite("Lr", &MachineParams::Lr)
        .def_readwrite("Lm", &MachineParams::Lm)
        .def_readwrite("Lsigma", &MachineParams::Lsigma)
        .def_readwrite("P", &MachineParams::P)
        .def_readwrite("J", &MachineParams::J)
        .def_readwrite("B", &MachineParams::B)
        .def_readwrite("Vdc", &MachineParams::Vdc)
        .def_readwrite("Fs", &MachineParams::Fs)
        .def_readwrite("Ts", &MachineParams::Ts)
        .def("validate", &MachineParams::validate);

    py::class_<MachineState>(m, "MachineState")
        .def(py::init<>())
        .def_readwrite("ids", &MachineState::ids)
        .def_readwrite("iqs", &MachineState::iqs)
        .def_readwrite("lam_dr", &MachineState::lam_dr)
        .def_readwrite("lam_qr", &MachineState::lam_qr)
        .def_readwrite("omega_r", &MachineState::omega_r)
        .def_readwrite("theta_e", &MachineState::theta_e);

    py::class_<MachineInput>(m, "MachineInput")
        .def(py::init<>())
        .def_readwrite("vds", &MachineInput::vds)
        .def_readwrite("vqs", &MachineInput::vqs)
        .def_readwrite("omega_e", &MachineInput::omega_e)
        .def_readwrite("T_load", &MachineInput::T_load);

    m.def("electrical_derivative", &electrical_derivative, py::arg("state"), py::arg("input"),
          py::arg("params"));
    m.def("fo_current_derivative", &fo_current_derivative, py::arg("state"), py::arg("input"),
          py::arg("params"));
    m.def("torque", &torque, py::arg("state"), py::arg("params"));
    m.def("step", &step, py::arg("state"), py::arg("input"), py::arg("params"), py::arg("h"));

    m.def(
        "park",
        [](double a, double b, double c, double theta) {
            const DqPair dq = park({a, b, c}, theta);
            return py::make_tuple(dq.d, dq.q);
        },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("theta"));
    m.def(
        "inverse_park",
        [](double d, double q, double theta) {
            const auto abc = inverse_park({d, q}, theta);
            return py::make_tuple(abc[0], abc[1], abc[2]);
        },
        py::arg("d"), py::arg("q"), py::arg("theta"));

    py::class_<expr::Expression>(m, "Expression")
        .def_static("parse", [](const std::string& text) { return expr::parse(text); },
                    py::arg("text"))
        .def("__str__", [](const expr::Expression& e) { return expr::to_text(e); })
        .def("to_text", [](const expr::Expression& e) { return expr::to_text(e); })
        .def("complexity", [](const expr::Expression& e) { return expr::complexity(e); })
        .def(
            "eval",
            [](const expr::Expression& e, double x1, double x2, double x3, double x4) {
                return expr::eval(e, {x1, x2, x3, x4});
            },
            py::arg("x1"), py::arg("x2"), py::arg("x3") = 0.0, py::arg("x4") = 0.0)
        .def(
            "eval_batch",
            [](const expr::Expression& e, py::array_t<double, py::array::c_style> x) {
                if (x.ndim() != 2 || x.shape(1) != 4)
                    throw std::invalid_argument("expected an (n, 4) array");
                const auto view = x.unchecked<2>();
                py::array_t<double> out(x.shape(0));
                auto out_view = out.mutable_unchecked<1>();
                for (py::ssize_t i = 0; i < x.shape(0); ++i)
                    out_view(i) = expr::eval(e, {view(i, 0), view(i, 1), view(i, 2), view(i, 3)});
                return out;
            },
            py::arg("x"));

    m.def("parse_expression", [](const std::string& text) { return expr::parse(text); },
          py::arg("text"));

    py::class_<DsrControlLaw>(m, "DsrControlLaw")
        .def_static("canonical", &DsrControlLaw::canonical)
        .def_static("load", &DsrControlLaw::load, py::arg("path"))
        .def(
            "__call__",
            [](const DsrControlLaw& law, double x1, double x2, double x3, double x4,
               double vdc) {
                const ControllerOutput out = law({x1, x2, x3, x4}, vdc);
                return py::make_tuple(out.vd_ref, out.vq_ref);
            },
            py::arg("x1"), py::arg("x2"), py::arg("x3"), py::arg("x4"), py::arg("vdc") = 311.0);

    py::class_<Scenario>(m, "Scenario")
        .def_static("from_file", &Scenario::from_file, py::arg("path"))
        .def_static("from_json", &Scenario::from_json_text, py::arg("json_text"))
        .def_readwrite("name", &Scenario::name)
        .def_readwrite("duration", &Scenario::duration)
        .def_readwrite("flux_ref", &Scenario::flux_ref)
        .def_readwrite("controller", &Scenario::controller)
        .def_readwrite("seed", &Scenario::seed);

    m.def(
        "run_scenario",
        [](const Scenario& sc) { return timeseries_to_dict(run_scenario(sc)); },
        py::arg("scenario"), "Simulate a scenario; returns a dict of numpy columns.");
    m.def(
        "run_scenario_file",
        [](const std::filesystem::path& path) {
            return timeseries_to_dict(run_scenario(Scenario::from_file(path)));
        },
        py::arg("path"));
    m.def(
        "compare",
        [](const Scenario& sc, const std::vector<std::string>& controllers) {
            const ComparisonReport report = compare(sc, controllers);
            py::list rows;
            for (const auto& r : report.rows) {
                py::dict d;
                d["controller"] = r.controller;
                d["axis_d_rmse"] = r.axis_d_rmse;
                d["axis_q_rmse"] = r.axis_q_rmse;
                d["thd"] = r.thd;
                d["rms_ia"] = r.rms_ia;
                d["pkpk_err"] = r.pkpk_err;
                rows.append(std::move(d));
            }
            return rows;
        },
        py::arg("scenario"), py::arg("controllers"));

    m.def(
        "thd",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> samples,
           double sample_rate, double fundamental, int n_harmonics) {
            const auto view = samples.unchecked<1>();
            std::vector<double> data(static_cast<std::size_t>(view.shape(0)));
            for (py::ssize_t i = 0; i < view.shape(0); ++i)
                data[static_cast<std::size_t>(i)] = view(i);
            return thd({data, sample_rate, fundamental}, n_harmonics);
        },
        py::arg("samples"), py::arg("sample_rate"), py::arg("fundamental"),
        py::arg("n_harmonics") = kThdHarmonics);

    m.def(
        "tracking_metrics",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> ref,
           py::array_t<double, py::array::c_style | py::array::forcecast> meas) {
            const auto rv = ref.unchecked<1>();
            const auto mv = meas.unchecked<1>();
            std::vector<double> r(static_cast<std::size_t>(rv.shape(0)));
            std::vector<double> m2(static_cast<std::size_t>(mv.shape(0)));
            for (py::ssize_t i = 0; i < rv.shape(0); ++i) r[static_cast<std::size_t>(i)] = rv(i);
            for (py::ssize_t i = 0; i < mv.shape(0); ++i) m2[static_cast<std::size_t>(i)] = mv(i);
            const TrackingStats stats = tracking_metrics(r, m2);
            py::dict d;
            d["rmse"] = stats.rmse;
            d["peak_to_peak_error"] = stats.peak_to_peak_error;
            d["rms_measured"] = stats.rms_measured;
            return d;
        },
        py::arg("reference"), py::arg("measured"));

    py::class_<dsr::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("batch_size", &dsr::TrainConfig::batch_size)
        .def_readwrite("epochs", &dsr::TrainConfig::epochs)
        .def_readwrite("risk_quantile", &dsr::TrainConfig::risk_quantile)
        .def_readwrite("learning_rate", &dsr::TrainConfig::learning_rate)
        .def_readwrite("max_length", &dsr::TrainConfig::max_length)
        .def_readwrite("entropy_weight", &dsr::TrainConfig::entropy_weight)
        .def_readwrite("hidden_width", &dsr::TrainConfig::hidden_width)
        .def_readwrite("seed", &dsr::TrainConfig::seed)
        .def("validate", &dsr::TrainConfig::validate);

    m.def(
        "train_from_csv",
        [](const std::string& dataset_prefix, const dsr::TrainConfig& cfg,
           const std::filesystem::path& out_dir) {
            const dsr::Dataset vd = dsr::Dataset::read_csv(dataset_prefix + "_vd.csv");
            const dsr::Dataset vq = dsr::Dataset::read_csv(dataset_prefix + "_vq.csv");
            const dsr::TrainResult result = dsr::train(vd, vq, cfg);
            dsr::write_training_output(out_dir, result, cfg, vd.content_hash(),
                                       vq.content_hash());
            py::dict d;
            d["vd_expression"] = expr::to_text(result.vd.best_expression);
            d["vq_expression"] = expr::to_text(result.vq.best_expression);
            d["vd_reward"] = result.vd.best_reward;
            d["vq_reward"] = result.vq.best_reward;
            return d;
        },
        py::arg("dataset_prefix"), py::arg("config"), py::arg("out_dir"),
        "Train both axes from <prefix>_vd.csv / <prefix>_vq.csv and write the "
        "expression files plus metadata into out_dir.");
}
