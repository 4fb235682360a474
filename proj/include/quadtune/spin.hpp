#ifndef QUADTUNE_SPIN_HPP
#define QUADTUNE_SPIN_HPP

#include <complex>
#include <string>
#include <vector>

#include "quadtune/constants.hpp"

namespace quadtune {

// Angular momentum matrices in the I_z eigenbasis, ordered m = I, I-1, ..., -I.
struct SpinOperators {
  int dim = 0;
  Eigen::MatrixXcd ix, iy, iz;
};

SpinOperators spin_operators(double spin);

// f0 = mu_n * g_n * B0 / h
double larmor_frequency(const SpinSystem& sys, const FieldConfig& field,
                        const PhysicalConstants& k = {});

// Fractional deviation of the bound g-factor from the free-nucleus reference.
inline double chemical_shift(const SpinSystem& sys) { return sys.g_n / sys.g_n_free - 1.0; }

// H/h in Hz, Hermitian, I_z eigenbasis ordered m = I ... -I.
struct NuclearHamiltonian {
  int dim = 0;
  Eigen::MatrixXcd matrix;
};

// H/h = -f0 I_z + e q / (4 I (2I-1) h) * sum_ij V_ij (I_i I_j + I_j I_i).
// For a traceless V this equals the usual quadrupole coupling written with
// the -delta_ij I^2 counterterm; the EFG must be symmetric and traceless.
// Axial V with principal value V_n along unit n reduces to
//   H_Q/h = f_Q / (4 I (2I-1)) * (3 I_n^2 - I(I+1)),   f_Q = e q V_n / h,
// so that at theta = 0 the outer lines of I = 3/2 sit at f0 -+ f_Q/2.
NuclearHamiltonian build_hamiltonian(const SpinSystem& sys, double f0_hz,
                                     const Eigen::Matrix3d& efg,
                                     const PhysicalConstants& k = {});

// Same Hamiltonian for an axial EFG tilted by theta from the field axis,
// parameterized directly by f_Q instead of the tensor.
NuclearHamiltonian build_axial_hamiltonian(const SpinSystem& sys, double f0_hz,
                                           double fq_hz, double theta_rad);

struct Eigensystem {
  Eigen::VectorXd values;    // Hz, ascending
  Eigen::MatrixXcd vectors;  // columns, unitary
};

Eigensystem eigensystem(const NuclearHamiltonian& h);

struct Transition {
  double m_hi = 0.0;             // larger m of the pair (labels, not exact quantum numbers)
  double m_lo = 0.0;
  double frequency_hz = 0.0;
  double dipole_weight = 0.0;    // |<lo|I_x|hi>|^2
  double overlap = 1.0;          // dominant-m character of the labeled states
  int hi_index = -1;             // eigenstate columns (ascending-eigenvalue order)
  int lo_index = -1;
};

struct TransitionTable {
  std::vector<Transition> lines;   // ordered by m_hi descending: outer+, inner, outer-, ...
  bool ambiguous = false;          // some eigenstate had max m-overlap < 0.6

  const Transition& by_m(double m_hi) const;
  // I = 3/2 helpers
  const Transition& outer_plus() const { return by_m(1.5); }
  const Transition& inner() const { return by_m(0.5); }
  const Transition& outer_minus() const { return by_m(-0.5); }
};

// Allowed (delta m = +-1) transition frequencies and dipole weights.
// Eigenstates are labeled by dominant I_z character; below 0.6 overlap the
// labels fall back to sorted-eigenvalue adjacency and the table is flagged.
TransitionTable transition_frequencies(const NuclearHamiltonian& h);
TransitionTable transition_frequencies(const NuclearHamiltonian& h, const SpinOperators& ops);

// Symbolic transition names used by sequence descriptions ("inner",
// "outer+", "outer-"); resolved late against a TransitionTable.
double transition_label_m_hi(const std::string& label);
std::string transition_m_label(double m_hi);  // inverse, for diagnostics

// First-order quadrupole shift of the line m_hi <-> m_hi - 1:
//   delta f = (f_Q/4) (1 - 2 m_hi) P2(cos theta),
// i.e. -+ (f_Q/2) P2 for the satellites (m_hi = 3/2 resp. -1/2; -3/2 is
// accepted as an alias for the latter) and 0 for the central line.
// Valid for axial EFG, f_Q << f0.
double first_order_shift(double fq_hz, double theta_rad, double m_hi);

// Second-order shift, axial EFG, I = 3/2:
//   inner:  -(3 f_Q^2 / (64 f0)) (1 - cos^2) (9 cos^2 - 1)
//   outer:  +(3 f_Q^2 / (32 f0)) sin^2(2 theta)   (both satellites alike)
// Derived from second-order perturbation theory and checked against exact
// diagonalization to O(f_Q^3/f0^2) in the test suite.
double second_order_shift(double fq_hz, double f0_hz, double theta_rad, double m_hi);

inline bool perturbative_regime(double fq_hz, double f0_hz) {
  return std::abs(fq_hz) <= 0.3 * f0_hz;
}

constexpr double magic_angle_rad = 0.9553166181245093;  // acos(1/sqrt(3))

struct AngularShift {
  double theta_rad = 0.0;
  double m_hi = 0.0;
  double exact_hz = 0.0;         // eigensystem frequency minus f0
  double perturbative_hz = 0.0;  // first- plus second-order formula
};

// Exact and perturbative shift curves over theta in [theta_lo, theta_hi],
// one entry per (theta, transition).
std::vector<AngularShift> angular_sweep(const SpinSystem& sys, double f0_hz, double fq_hz,
                                        int n_points, double theta_lo_rad = 0.0,
                                        double theta_hi_rad = 1.5707963267948966);

// Rotation taking `axis` to +z; applied to tensors entering build_hamiltonian
// when the field is not along the crystal z axis.
Eigen::Matrix3d rotation_to_z(const Eigen::Vector3d& axis);

}  // namespace quadtune

#endif
