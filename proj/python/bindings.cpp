#include <algorithm>
#include <functional>

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "abmflow/adaptive.hpp"
#include "abmflow/fields.hpp"
#include "abmflow/harness.hpp"
#include "abmflow/mgfi.hpp"
#include "abmflow/solvers.hpp"

namespace py = pybind11;
using namespace abmflow;

PYBIND11_MODULE(_core, m) {
    m.doc() = "ODE integration with a two-step predictor-corrector scheme, "
              "adaptive step-size control and mask-guided feature blending";

    py::enum_<Direction>(m, "Direction")
        .value("INVERSION", Direction::Inversion)
        .value("SAMPLING", Direction::Sampling);
    py::enum_<PcMode>(m, "PcMode")
        .value("PECE", PcMode::Pece)
        .value("PEC", PcMode::Pec);
    py::enum_<SolverKind>(m, "SolverKind")
        .value("EULER", SolverKind::Euler)
        .value("MIDPOINT", SolverKind::Midpoint)
        .value("ABM_PECE", SolverKind::AbmPece)
        .value("ABM_PEC", SolverKind::AbmPec);
    py::enum_<RejectionPolicy>(m, "RejectionPolicy")
        .value("ACCEPT_ALWAYS", RejectionPolicy::AcceptAlways)
        .value("REJECT_RETRY", RejectionPolicy::RejectRetry);
    py::enum_<ErrorNorm>(m, "ErrorNorm")
        .value("L2_TOTAL", ErrorNorm::L2Total)
        .value("L2_RMS", ErrorNorm::L2Rms);

    py::class_<VelocityField>(m, "VelocityField")
        .def(py::init([](const std::string& name, int dim,
                         std::function<Vec(Vec, double)> eval) {
                 // Python-defined fields evaluate through a list shim.
                 auto shim = [eval = std::move(eval)](
                                 std::span<const double> z, double t,
                                 std::span<double> out) {
                     const Vec r = eval(Vec(z.begin(), z.end()), t);
                     if (r.size() != out.size()) {
                         throw std::invalid_argument(
                             "evaluator returned the wrong dimension");
                     }
                     std::copy(r.begin(), r.end(), out.begin());
                 };
                 return VelocityField(name, dim, std::move(shim));
             }),
             py::arg("name"), py::arg("dim"), py::arg("eval"))
        .def_property_readonly("name", &VelocityField::name)
        .def_property_readonly("dim", &VelocityField::dim)
        .def_property_readonly("lipschitz_bound",
                               &VelocityField::lipschitz_bound)
        .def_property_readonly("has_exact", &VelocityField::has_exact)
        .def("__call__",
             [](const VelocityField& f, const Vec& z, double t) {
                 return f(z, t);
             },
             py::arg("z"), py::arg("t"))
        .def("exact",
             [](const VelocityField& f, const Vec& z, double t0, double t1) {
                 return f.exact(z, t0, t1);
             },
             py::arg("z"), py::arg("t_start"), py::arg("t_end"));

    py::class_<RectifiedPair>(m, "RectifiedPair")
        .def(py::init<Vec, Vec>(), py::arg("z0"), py::arg("z1"))
        .def_readwrite("z0", &RectifiedPair::z0)
        .def_readwrite("z1", &RectifiedPair::z1);

    m.def("field_by_name", &field_by_name, py::arg("name"), py::arg("dim") = 2);
    m.def("field_catalog", &field_catalog);
    m.def("make_constant_field", &make_constant_field, py::arg("c"));
    m.def("make_zero_field", &make_zero_field, py::arg("dim"));
    m.def("make_decay_field", &make_decay_field, py::arg("dim"),
          py::arg("lam") = 1.0);
    m.def("make_rotation_field", &make_rotation_field, py::arg("omega") = 1.0);
    m.def("make_time_sine_field", &make_time_sine_field, py::arg("dim"));
    m.def("make_surrogate_field", &make_surrogate_field, py::arg("dim"),
          py::arg("a") = 0.5, py::arg("b") = 0.3);
    m.def("make_rectified_field", &make_rectified_field, py::arg("pair"));
    m.def("reference_solve",
          [](const VelocityField& f, const Vec& z, double t0, double t1,
             long steps) { return reference_solve(f, z, t0, t1, steps); },
          py::arg("field"), py::arg("z_start"), py::arg("t_start"),
          py::arg("t_end"), py::arg("oracle_steps"));

    py::class_<TimeGrid>(m, "TimeGrid")
        .def(py::init<Vec>(), py::arg("times"))
        .def_static("uniform", &TimeGrid::uniform, py::arg("t_start"),
                    py::arg("t_end"), py::arg("n_intervals"))
        .def_property_readonly("direction", &TimeGrid::direction)
        .def_property_readonly("times",
                               [](const TimeGrid& g) { return g.times(); })
        .def("reversed", &TimeGrid::reversed);

    py::class_<StepRecord>(m, "StepRecord")
        .def_readonly("t_from", &StepRecord::t_from)
        .def_readonly("t_to", &StepRecord::t_to)
        .def_readonly("h", &StepRecord::h)
        .def_readonly("error_estimate", &StepRecord::error_estimate)
        .def_readonly("next_h", &StepRecord::next_h)
        .def_readonly("accepted", &StepRecord::accepted)
        .def_readonly("frozen", &StepRecord::frozen);

    py::class_<SolverRun>(m, "SolverRun")
        .def_readonly("nfe", &SolverRun::nfe)
        .def_readonly("per_step", &SolverRun::per_step)
        .def_property_readonly("times",
                               [](const SolverRun& r) {
                                   Vec t;
                                   t.reserve(r.trajectory.size());
                                   for (const auto& p : r.trajectory) {
                                       t.push_back(p.t);
                                   }
                                   return t;
                               })
        .def_property_readonly("states",
                               [](const SolverRun& r) {
                                   std::vector<Vec> z;
                                   z.reserve(r.trajectory.size());
                                   for (const auto& p : r.trajectory) {
                                       z.push_back(p.z);
                                   }
                                   return z;
                               })
        .def_property_readonly("terminal_state", &SolverRun::terminal_state)
        .def_property_readonly("terminal_time", &SolverRun::terminal_time)
        .def_property_readonly("steps_taken", &SolverRun::steps_taken)
        .def_property_readonly("rejected_steps", &SolverRun::rejected_steps);

    m.def("euler_step",
          [](const VelocityField& f, const Vec& z, double t, double h) {
              return euler_step(f, z, t, h);
          },
          py::arg("field"), py::arg("z"), py::arg("t"), py::arg("h"));
    m.def("midpoint_step",
          [](const VelocityField& f, const Vec& z, double t, double h) {
              return midpoint_step(f, z, t, h);
          },
          py::arg("field"), py::arg("z"), py::arg("t"), py::arg("h"));
    m.def("abm_solve",
          [](const VelocityField& f, const Vec& z, const TimeGrid& g,
             PcMode mode) { return abm_solve(f, z, g, mode); },
          py::arg("field"), py::arg("z_start"), py::arg("grid"),
          py::arg("mode") = PcMode::Pece);
    m.def("solve_grid",
          [](const VelocityField& f, const Vec& z, const TimeGrid& g,
             SolverKind kind) { return solve_grid(f, z, g, kind); },
          py::arg("field"), py::arg("z_start"), py::arg("grid"),
          py::arg("kind"));
    m.def("local_truncation_probe",
          [](const VelocityField& f, double t, double h) {
              return local_truncation_probe(f, t, h);
          },
          py::arg("field"), py::arg("t"), py::arg("h"));

    py::class_<RoundTrip>(m, "RoundTrip")
        .def_readonly("z_noise", &RoundTrip::z_noise)
        .def_readonly("z_recon", &RoundTrip::z_recon)
        .def_readonly("total_nfe", &RoundTrip::total_nfe);
    m.def("invert_then_reconstruct",
          [](const VelocityField& f, const Vec& z, const TimeGrid& g,
             SolverKind kind) { return invert_then_reconstruct(f, z, g, kind); },
          py::arg("field"), py::arg("z_data"), py::arg("grid"),
          py::arg("kind") = SolverKind::AbmPece);

    py::class_<StepController>(m, "StepController")
        .def(py::init<>())
        .def_readwrite("epsilon", &StepController::epsilon)
        .def_readwrite("order_p", &StepController::order_p)
        .def_readwrite("h_init", &StepController::h_init)
        .def_readwrite("h_min", &StepController::h_min)
        .def_readwrite("h_max", &StepController::h_max)
        .def_readwrite("warmup_steps", &StepController::warmup_steps)
        .def_readwrite("cooldown_steps", &StepController::cooldown_steps)
        .def_readwrite("rejection", &StepController::rejection)
        .def_readwrite("error_norm", &StepController::error_norm)
        .def("resolved", &StepController::resolved, py::arg("h_base"));

    m.def("error_estimate",
          [](const Vec& zp, const Vec& zc, ErrorNorm norm) {
              return error_estimate(zp, zc, norm);
          },
          py::arg("z_pred"), py::arg("z_corr"),
          py::arg("norm") = ErrorNorm::L2Total);
    m.def("next_step_size", &next_step_size, py::arg("h"), py::arg("e"),
          py::arg("ctrl"));
    m.def("adaptive_abm_solve",
          [](const VelocityField& f, const Vec& z, double t0, double t1,
             const StepController& ctrl, int nominal, PcMode mode) {
              return adaptive_abm_solve(f, z, t0, t1, ctrl, nominal, mode);
          },
          py::arg("field"), py::arg("z_start"), py::arg("t_start"),
          py::arg("t_end"), py::arg("ctrl"), py::arg("nominal_steps"),
          py::arg("mode") = PcMode::Pece);

    py::class_<AdaptiveRoundTrip>(m, "AdaptiveRoundTrip")
        .def_readonly("z_noise", &AdaptiveRoundTrip::z_noise)
        .def_readonly("z_recon", &AdaptiveRoundTrip::z_recon)
        .def_readonly("total_nfe", &AdaptiveRoundTrip::total_nfe)
        .def_readonly("steps_taken", &AdaptiveRoundTrip::steps_taken)
        .def_readonly("rejected_steps", &AdaptiveRoundTrip::rejected_steps);
    m.def("adaptive_round_trip",
          [](const VelocityField& f, const Vec& z, const StepController& ctrl,
             int nominal, PcMode mode) {
              return adaptive_round_trip(f, z, ctrl, nominal, mode);
          },
          py::arg("field"), py::arg("z_data"), py::arg("ctrl"),
          py::arg("nominal_steps"), py::arg("mode") = PcMode::Pece);

    py::class_<FeatureTensor>(m, "FeatureTensor")
        .def(py::init<int, int>(), py::arg("positions"), py::arg("channels"))
        .def(py::init<int, int, std::vector<double>>(), py::arg("positions"),
             py::arg("channels"), py::arg("data"))
        .def_readonly("positions", &FeatureTensor::positions)
        .def_readonly("channels", &FeatureTensor::channels)
        .def_readonly("data", &FeatureTensor::data);

    py::class_<SimilarityMap>(m, "SimilarityMap")
        .def_readonly("values", &SimilarityMap::values);

    py::class_<BinaryMask>(m, "BinaryMask")
        .def_readonly("bits", &BinaryMask::bits)
        .def_readonly("tau", &BinaryMask::tau)
        .def("density", &BinaryMask::density);

    m.def("cosine_similarity_map", &cosine_similarity_map, py::arg("a"),
          py::arg("b"));
    m.def("threshold_mask", &threshold_mask, py::arg("s"),
          py::arg("tau") = kDefaultTau);
    m.def("masked_blend", &masked_blend, py::arg("mask"), py::arg("inv"),
          py::arg("smp"));
    m.def("mgfi_apply", &mgfi_apply, py::arg("inv_curr"), py::arg("smp_curr"),
          py::arg("inv_next"), py::arg("smp_next"),
          py::arg("tau") = kDefaultTau);
    m.def("random_tensor", &random_tensor, py::arg("positions"),
          py::arg("channels"), py::arg("seed"));
    m.def("perturbed_copy", &perturbed_copy, py::arg("base"),
          py::arg("magnitude"), py::arg("seed"));

    m.def("fit_loglog_slope", &fit_loglog_slope, py::arg("points"));

#ifdef VERSION_INFO
    m.attr("__version__") = VERSION_INFO;
#else
    m.attr("__version__") = "0.1.0";
#endif
}
