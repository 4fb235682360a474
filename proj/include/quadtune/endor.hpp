#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quadtune/spin.hpp"

namespace quadtune {

// Protocol parameters of one electrically-detected ENDOR cycle: ionize one
// hyperfine line, drive rf on the ionized nuclei, recombine, reset by light.
struct EndorConfig {
  double ionize_m = 1.5;          // m_I selected by the ionization step
  double read_m = 1.5;            // m_I whose recovered population is read out
  double t_antiparallel_s = 5e-6; // fast (selective) recombination time
  double t_parallel_s = 6e-4;     // slow (parallel) recombination time
  double efficiency = 1.0;        // fraction of the target pool ionized
  double rf_start_hz = 0.0;       // sweep range
  double rf_stop_hz = 0.0;
  double rf_duration_s = 4e-4;    // square rf pulse length

  void validate() const;
};

// Occupancies of the four m_I levels in each charge pool, ordered by
// descending m: index 0 <-> +3/2 ... index 3 <-> -3/2.
struct PopulationVector {
  Eigen::Vector4d as0 = Eigen::Vector4d::Zero();
  Eigen::Vector4d asp = Eigen::Vector4d::Zero();

  void validate(double tol = 1e-12) const;
  double total() const { return as0.sum() + asp.sum(); }

  // all neutral, evenly spread over the four levels
  static PopulationVector equilibrium();
};

int m_index(double m);     // +3/2 -> 0 ... -3/2 -> 3; throws otherwise

// Distribution of the quadrupole coupling across the ensemble.
struct BroadeningModel {
  enum class Shape { gaussian, one_sided_exponential };

  double spread_hz = 0.0;  // gaussian: std dev; exponential: 1/e scale
  double asymmetry = 0.0;  // weight imbalance between +f_Q and -f_Q tails
  Shape shape = Shape::gaussian;
  int nodes = 32;          // quadrature nodes (>= 32)

  void validate() const;
};

// (deviation from nominal f_Q, probability weight) pairs; weights sum to 1
std::vector<std::pair<double, double>> broadening_nodes(const BroadeningModel& b);

struct Spectrum {
  std::vector<double> frequency_hz;
  std::vector<double> signal;  // baseline 1, dips toward 1 - efficiency

  double ionize_m = 1.5;
  double read_m = 1.5;
  double f0_hz = 0.0;
  double fq_hz = 0.0;
  double theta_rad = 0.0;
  BroadeningModel broadening;
  std::string warning;  // set when the sweep misses every transition

  void validate() const;
};

// One full protocol cycle: selective ionization, rf transfer between
// m-adjacent As+ levels (weight = excitation_profile at each line's
// detuning, applied in descending-m order), parallel recombination of the
// remaining neutrals, complete optical reset back to As0.
PopulationVector run_endor_step(const PopulationVector& pop, const EndorConfig& cfg,
                                double rf_hz, const TransitionTable& table);

// read-target As0 population relative to the equilibrium 1/4
double endor_signal(const PopulationVector& pop, double read_m);

// Sweep rf over the configured range for an axial coupling (f_Q, theta),
// averaging the protocol response over the f_Q distribution.
Spectrum synthesize_spectrum(const EndorConfig& cfg, const SpinSystem& sys,
                             double f0_hz, double fq_hz, double theta_rad,
                             const BroadeningModel& broadening, int n_points);

// one spectrum per EDMR line, ionize = read = m for m in {3/2,1/2,-1/2,-3/2}
std::vector<Spectrum> synthesize_four_spectra(const EndorConfig& base,
                                              const SpinSystem& sys, double f0_hz,
                                              double fq_hz, double theta_rad,
                                              const BroadeningModel& broadening,
                                              int n_points);

struct Peak {
  double center_hz = 0.0;
  double depth = 0.0;     // 1 - signal at the minimum
  double width_hz = 0.0;  // full width at half depth
  bool multiplet = false; // closer than one width to a neighbor
};

// local minima below 1 - min_depth, parabolically refined to sub-bin accuracy
std::vector<Peak> peak_positions(const Spectrum& spec, double min_depth = 0.01);

}  // namespace quadtune
