#ifndef QUADTUNE_SEQLANG_HPP
#define QUADTUNE_SEQLANG_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "quadtune/constants.hpp"
#include "quadtune/dynamics.hpp"
#include "quadtune/endor.hpp"
#include "quadtune/strain.hpp"

namespace quadtune {

struct ParseDiagnostic {
  enum class Severity { error, warning };
  Severity severity = Severity::error;
  int line = 1;
  int column = 1;
  std::string message;
  std::string token;  // offending lexeme, possibly empty
};

// [strain]: how the lattice strain (and hence f_Q) is specified
struct StrainSection {
  std::string mode = "none";  // none | stack-100 | stack-111 | uniaxial | tensor | direct
  double eps_parallel = 0.0;
  double eps_perp = 0.0;
  bool eps_perp_given = false;
  double eps_trans = 0.0;                           // uniaxial
  Eigen::Vector3d axis = {0.0, 0.0, 1.0};           // uniaxial
  Eigen::Matrix3d tensor = Eigen::Matrix3d::Zero();  // tensor mode
  double fq_hz = 0.0;                               // direct mode
};

struct FieldSection {
  double b0_t = 0.35;
  Eigen::Vector3d orientation = {0.0, 0.0, 1.0};
  double theta_rad = 0.0;  // angle between B0 and the EFG principal axis
};

struct SweepSection {
  bool present = false;
  std::string variable;  // theta | strain | B0
  double start = 0.0, stop = 0.0;
  int points = 0;
};

struct NoiseSection {
  bool present = false;
  double alpha = 1.0;
  double amplitude = 0.0;  // S(w) = amplitude * w^-alpha
  double f_low_hz = 0.01, f_high_hz = 1e6;
  double t2_calibration_s = 0.0;  // 0 = amplitude taken as-is
  int n_calibration = 1;
  std::vector<int> n_pulses = {1, 2, 4, 8, 16, 32};
  int t_points = 25;
};

struct EndorSection {
  double efficiency = 1.0;
  double rf_duration_s = 4e-4;
  double rf_start_hz = 0.0, rf_stop_hz = 0.0;  // both 0 = automatic window
  int points = 500;
};

struct OutputSection {
  std::string prefix = "quadtune";
  std::string format = "csv";  // csv | json
};

struct ExperimentConfig {
  SpinSystem system;
  FieldSection field;
  StrainSection strain;
  GradientElasticTensor tensor_s;
  BroadeningModel broadening;
  NoiseSection noise;
  EndorSection endor;
  SweepSection sweep;
  OutputSection output;
  std::map<std::string, PulseSequence> sequences;
};

struct ParseResult {
  ExperimentConfig config;
  std::vector<ParseDiagnostic> diagnostics;
  bool ok() const;  // true when no error-severity diagnostics
};

// Recursive-descent parser for the .qsx experiment language. Collects every
// diagnostic it can instead of stopping at the first; defaults fill all
// sections that the text does not mention.
ParseResult parse_config(const std::string& text);

// Cross-field checks on a parsed (or programmatically built) config. Never
// throws; fills derived values (eps_perp for stack modes). Warnings include
// f_Q/f0 > 0.3 where the perturbative formulas degrade.
std::vector<ParseDiagnostic> validate_config(ExperimentConfig& cfg,
                                             const PhysicalConstants& k = {});

// Canonical form: fixed section order, canonical units (Hz, s, T, rad),
// %.17g numbers. parse(serialize(cfg)) reproduces cfg exactly.
std::string serialize_config(const ExperimentConfig& cfg);

// resolved physics inputs
double config_f0_hz(const ExperimentConfig& cfg, const PhysicalConstants& k = {});
QuadrupoleCoupling config_fq(const ExperimentConfig& cfg);

}  // namespace quadtune

#endif
