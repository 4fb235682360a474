#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "quadtune/dynamics.hpp"
#include "quadtune/endor.hpp"
#include "quadtune/fit.hpp"
#include "quadtune/seqlang.hpp"
#include "quadtune/spin.hpp"
#include "quadtune/strain.hpp"

namespace py = pybind11;
using namespace quadtune;

PYBIND11_MODULE(_core, m) {
  m.doc() = "simulation and estimation for strain-tuned quadrupolar donor spins";
  m.attr("__version__") = QUADTUNE_VERSION;
  m.attr("magic_angle_rad") = magic_angle_rad;

  // ---- system & field ----
  py::class_<PhysicalConstants>(m, "PhysicalConstants")
      .def(py::init<>())
      .def_readwrite("h", &PhysicalConstants::h)
      .def_readwrite("mu_n", &PhysicalConstants::mu_n)
      .def_readwrite("e", &PhysicalConstants::e);

  py::class_<SpinSystem>(m, "SpinSystem")
      .def(py::init<>())
      .def_readwrite("spin", &SpinSystem::spin)
      .def_readwrite("g_n", &SpinSystem::g_n)
      .def_readwrite("q", &SpinSystem::q)
      .def_readwrite("g_n_free", &SpinSystem::g_n_free);

  py::class_<FieldConfig>(m, "FieldConfig")
      .def(py::init<>())
      .def_readwrite("b0", &FieldConfig::b0)
      .def_readwrite("axis", &FieldConfig::axis);

  m.def("make_field", &make_field, py::arg("b0"), py::arg("direction"));
  m.def("larmor_frequency", &larmor_frequency, py::arg("sys"), py::arg("field"),
        py::arg("constants") = PhysicalConstants{});
  m.def("chemical_shift", &chemical_shift, py::arg("sys"));

  // ---- spin Hamiltonian & transitions ----
  py::class_<NuclearHamiltonian>(m, "NuclearHamiltonian")
      .def_readonly("dim", &NuclearHamiltonian::dim)
      .def_readonly("matrix", &NuclearHamiltonian::matrix);

  m.def("build_hamiltonian", &build_hamiltonian, py::arg("sys"), py::arg("f0_hz"),
        py::arg("efg"), py::arg("constants") = PhysicalConstants{});
  m.def("build_axial_hamiltonian", &build_axial_hamiltonian, py::arg("sys"),
        py::arg("f0_hz"), py::arg("fq_hz"), py::arg("theta_rad"));

  py::class_<Transition>(m, "Transition")
      .def_readonly("m_hi", &Transition::m_hi)
      .def_readonly("m_lo", &Transition::m_lo)
      .def_readonly("frequency_hz", &Transition::frequency_hz)
      .def_readonly("dipole_weight", &Transition::dipole_weight)
      .def_readonly("overlap", &Transition::overlap);

  py::class_<TransitionTable>(m, "TransitionTable")
      .def_readonly("lines", &TransitionTable::lines)
      .def_readonly("ambiguous", &TransitionTable::ambiguous)
      .def("by_m", &TransitionTable::by_m, py::arg("m_hi"),
           py::return_value_policy::reference_internal);

  m.def("transition_frequencies",
        py::overload_cast<const NuclearHamiltonian&>(&transition_frequencies),
        py::arg("hamiltonian"));
  m.def("first_order_shift", &first_order_shift, py::arg("fq_hz"),
        py::arg("theta_rad"), py::arg("m_hi"));
  m.def("second_order_shift", &second_order_shift, py::arg("fq_hz"),
        py::arg("f0_hz"), py::arg("theta_rad"), py::arg("m_hi"));

  py::class_<AngularShift>(m, "AngularShift")
      .def_readonly("theta_rad", &AngularShift::theta_rad)
      .def_readonly("m_hi", &AngularShift::m_hi)
      .def_readonly("exact_hz", &AngularShift::exact_hz)
      .def_readonly("perturbative_hz", &AngularShift::perturbative_hz);

  m.def("angular_sweep", &angular_sweep, py::arg("sys"), py::arg("f0_hz"),
        py::arg("fq_hz"), py::arg("n_points"), py::arg("theta_lo_rad") = 0.0,
        py::arg("theta_hi_rad") = 1.5707963267948966);

  // ---- strain chain ----
  py::enum_<StackOrientation>(m, "StackOrientation")
      .value("s100", StackOrientation::s100)
      .value("s111", StackOrientation::s111);

  py::enum_<ShearConvention>(m, "ShearConvention")
      .value("tensor", ShearConvention::tensor)
      .value("engineering", ShearConvention::engineering);

  py::class_<StiffnessConstants>(m, "StiffnessConstants")
      .def(py::init<>())
      .def_readwrite("c11", &StiffnessConstants::c11)
      .def_readwrite("c12", &StiffnessConstants::c12)
      .def_readwrite("c44", &StiffnessConstants::c44);

  py::class_<GradientElasticTensor>(m, "GradientElasticTensor")
      .def(py::init<>())
      .def_readwrite("s11", &GradientElasticTensor::s11)
      .def_readwrite("s44", &GradientElasticTensor::s44)
      .def_readwrite("convention", &GradientElasticTensor::convention)
      .def("s12", &GradientElasticTensor::s12);

  m.def("biaxial_perp_ratio", &biaxial_perp_ratio, py::arg("orientation"),
        py::arg("stiffness") = StiffnessConstants{});
  m.def("biaxial_thermal_strain",
        py::overload_cast<double, StackOrientation, const StiffnessConstants&>(
            &biaxial_thermal_strain),
        py::arg("eps_par"), py::arg("orientation"),
        py::arg("stiffness") = StiffnessConstants{});
  m.def("biaxial_thermal_strain",
        py::overload_cast<double, double, StackOrientation>(&biaxial_thermal_strain),
        py::arg("eps_par"), py::arg("eps_perp"), py::arg("orientation"));
  m.def("uniaxial_strain", &uniaxial_strain, py::arg("eps_long"),
        py::arg("eps_trans"), py::arg("axis"));
  m.def("efg_from_strain", &efg_from_strain, py::arg("eps"), py::arg("tensor"));

  py::class_<QuadrupoleCoupling>(m, "QuadrupoleCoupling")
      .def_readonly("fq_hz", &QuadrupoleCoupling::fq_hz)
      .def_readonly("axis", &QuadrupoleCoupling::axis)
      .def_readonly("degenerate", &QuadrupoleCoupling::degenerate);

  m.def("coupling_fq", &coupling_fq, py::arg("efg"), py::arg("sys"),
        py::arg("constants") = PhysicalConstants{});

  py::class_<ExtractedS>(m, "ExtractedS")
      .def_readonly("s11", &ExtractedS::s11)
      .def_readonly("s44", &ExtractedS::s44);

  m.def("extract_s", &extract_s, py::arg("fq_100_hz"), py::arg("fq_111_hz"),
        py::arg("eps100"), py::arg("eps111"), py::arg("sys"),
        py::arg("constants") = PhysicalConstants{},
        py::arg("convention") = ShearConvention::tensor);
  m.def("piezo_shift_forecast", &piezo_shift_forecast, py::arg("eps"),
        py::arg("tensor"), py::arg("geometry"), py::arg("sys"),
        py::arg("constants") = PhysicalConstants{});

  // ---- endor spectra ----
  py::class_<BroadeningModel> broadening(m, "BroadeningModel");
  py::enum_<BroadeningModel::Shape>(broadening, "Shape")
      .value("gaussian", BroadeningModel::Shape::gaussian)
      .value("one_sided_exponential", BroadeningModel::Shape::one_sided_exponential);
  broadening.def(py::init<>())
      .def_readwrite("spread_hz", &BroadeningModel::spread_hz)
      .def_readwrite("asymmetry", &BroadeningModel::asymmetry)
      .def_readwrite("shape", &BroadeningModel::shape)
      .def_readwrite("nodes", &BroadeningModel::nodes);

  py::class_<EndorConfig>(m, "EndorConfig")
      .def(py::init<>())
      .def_readwrite("ionize_m", &EndorConfig::ionize_m)
      .def_readwrite("read_m", &EndorConfig::read_m)
      .def_readwrite("efficiency", &EndorConfig::efficiency)
      .def_readwrite("rf_start_hz", &EndorConfig::rf_start_hz)
      .def_readwrite("rf_stop_hz", &EndorConfig::rf_stop_hz)
      .def_readwrite("rf_duration_s", &EndorConfig::rf_duration_s);

  py::class_<Spectrum>(m, "Spectrum")
      .def_readonly("frequency_hz", &Spectrum::frequency_hz)
      .def_readonly("signal", &Spectrum::signal)
      .def_readonly("ionize_m", &Spectrum::ionize_m)
      .def_readonly("read_m", &Spectrum::read_m)
      .def_readonly("f0_hz", &Spectrum::f0_hz)
      .def_readonly("fq_hz", &Spectrum::fq_hz)
      .def_readonly("theta_rad", &Spectrum::theta_rad)
      .def_readonly("warning", &Spectrum::warning);

  m.def("synthesize_spectrum", &synthesize_spectrum, py::arg("config"),
        py::arg("sys"), py::arg("f0_hz"), py::arg("fq_hz"), py::arg("theta_rad"),
        py::arg("broadening"), py::arg("n_points"));
  m.def("synthesize_four_spectra", &synthesize_four_spectra, py::arg("config"),
        py::arg("sys"), py::arg("f0_hz"), py::arg("fq_hz"), py::arg("theta_rad"),
        py::arg("broadening"), py::arg("n_points"));

  py::class_<Peak>(m, "Peak")
      .def_readonly("center_hz", &Peak::center_hz)
      .def_readonly("depth", &Peak::depth)
      .def_readonly("width_hz", &Peak::width_hz)
      .def_readonly("multiplet", &Peak::multiplet);

  m.def("peak_positions", &peak_positions, py::arg("spectrum"),
        py::arg("min_depth") = 0.01);

  // ---- coherence decay ----
  py::class_<NoiseModel>(m, "NoiseModel")
      .def(py::init<>())
      .def_readwrite("alpha", &NoiseModel::alpha)
      .def_readwrite("amplitude", &NoiseModel::amplitude)
      .def_readwrite("omega_low", &NoiseModel::omega_low)
      .def_readwrite("omega_high", &NoiseModel::omega_high);

  py::class_<DecayCurve>(m, "DecayCurve")
      .def_readonly("transition", &DecayCurve::transition)
      .def_readonly("n_pulses", &DecayCurve::n_pulses)
      .def_readonly("time_s", &DecayCurve::time_s)
      .def_readonly("amplitude", &DecayCurve::amplitude);

  py::class_<StretchedExpFit>(m, "StretchedExpFit")
      .def_readonly("t2_s", &StretchedExpFit::t2_s)
      .def_readonly("beta", &StretchedExpFit::beta);

  m.def("t2_extract", &t2_extract, py::arg("curve"));
  m.def("fit_power_law", &fit_power_law, py::arg("x"), py::arg("y"));

  m.def("cpmg_filter_function", &cpmg_filter_function, py::arg("n"),
        py::arg("total_time_s"), py::arg("omega_rad_s"));
  m.def("decoherence_integral", &decoherence_integral, py::arg("noise"),
        py::arg("n"), py::arg("t_s"), py::arg("rel_tol") = 1e-6);
  m.def("coherence_decay", &coherence_decay, py::arg("noise"), py::arg("n"),
        py::arg("t_grid_s"));
  m.def("coherence_time", &coherence_time, py::arg("noise"), py::arg("n"));
  m.def("calibrate_noise", &calibrate_noise, py::arg("alpha"),
        py::arg("t2_target_s"), py::arg("n") = 1,
        py::arg("omega_low") = 6.283185307179586e-2,
        py::arg("omega_high") = 6.283185307179586e6);

  // ---- estimation ----
  py::class_<FitResult>(m, "FitResult")
      .def_readonly("model", &FitResult::model)
      .def_readonly("names", &FitResult::names)
      .def_readonly("estimate", &FitResult::estimate)
      .def_readonly("sigma", &FitResult::sigma)
      .def_readonly("residual_norm", &FitResult::residual_norm)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("converged", &FitResult::converged);

  m.def("fit_gn", &fit_gn, py::arg("spectra"), py::arg("b0_t"),
        py::arg("sys") = SpinSystem{}, py::arg("constants") = PhysicalConstants{});
  m.def("fit_fq_angular", &fit_fq_angular, py::arg("shifts"), py::arg("order"),
        py::arg("f0_hz"), py::arg("sys") = SpinSystem{});
  m.def("fit_scaling", &fit_scaling, py::arg("t2_points"));

  // ---- experiment configs ----
  py::class_<ParseDiagnostic> diag(m, "ParseDiagnostic");
  py::enum_<ParseDiagnostic::Severity>(diag, "Severity")
      .value("error", ParseDiagnostic::Severity::error)
      .value("warning", ParseDiagnostic::Severity::warning);
  diag.def_readonly("severity", &ParseDiagnostic::severity)
      .def_readonly("line", &ParseDiagnostic::line)
      .def_readonly("column", &ParseDiagnostic::column)
      .def_readonly("message", &ParseDiagnostic::message)
      .def_readonly("token", &ParseDiagnostic::token)
      .def("__repr__", [](const ParseDiagnostic& d) {
        return std::to_string(d.line) + ":" + std::to_string(d.column) + ": " +
               (d.severity == ParseDiagnostic::Severity::error ? "error: "
                                                               : "warning: ") +
               d.message;
      });

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def("serialize", &serialize_config)
      .def("validate",
           [](ExperimentConfig& cfg) { return validate_config(cfg); })
      .def("f0_hz",
           [](const ExperimentConfig& cfg) { return config_f0_hz(cfg); })
      .def("fq_hz",
           [](const ExperimentConfig& cfg) { return config_fq(cfg).fq_hz; });

  py::class_<ParseResult>(m, "ParseResult")
      .def_readonly("config", &ParseResult::config)
      .def_readonly("diagnostics", &ParseResult::diagnostics)
      .def("ok", &ParseResult::ok);

  m.def("parse_config", &parse_config, py::arg("text"));
}
