#ifndef QUADTUNE_CONSTANTS_HPP
#define QUADTUNE_CONSTANTS_HPP

#include <Eigen/Dense>
#include <stdexcept>

namespace quadtune {

// 2018 CODATA values. Overridable only so tests can pin round numbers.
struct PhysicalConstants {
  double h = 6.62607015e-34;    // Planck constant, J s
  double mu_n = 5.0507837e-27;  // nuclear magneton, J/T
  double e = 1.602176634e-19;   // elementary charge, C

  bool valid() const { return h > 0 && mu_n > 0 && e > 0; }
};

// Nuclear species under study. Defaults describe the As-75 nucleus of an
// ionized arsenic donor: I = 3/2, q = 31.4 fm^2, bound g-factor 0.9558
// (the free-nucleus reference 0.95965 comes from the tabulated magnetic
// moment mu/mu_N = 1.43948 divided by I).
struct SpinSystem {
  double spin = 1.5;        // I, half-integer
  double g_n = 0.9558;      // nuclear g-factor (bound nucleus)
  double q = 3.14e-29;      // electric quadrupole moment, m^2
  double g_n_free = 0.95965;

  int multiplicity() const { return static_cast<int>(std::lround(2.0 * spin + 1.0)); }
};

inline bool is_half_integer_spin(double spin) {
  const double twice = 2.0 * spin;
  return spin > 0.25 && std::abs(twice - std::lround(twice)) < 1e-9;
}

inline void check_spin(const SpinSystem& sys) {
  if (!is_half_integer_spin(sys.spin))
    throw std::invalid_argument("spin I must be a positive half-integer (2I+1 >= 2)");
}

// Static field: magnitude and laboratory z direction.
struct FieldConfig {
  double b0 = 0.35;                         // T
  Eigen::Vector3d axis = {0.0, 0.0, 1.0};   // unit vector

  bool axis_is_unit() const { return std::abs(axis.norm() - 1.0) < 1e-12; }
};

inline FieldConfig make_field(double b0, const Eigen::Vector3d& direction) {
  if (b0 < 0.0) throw std::invalid_argument("B0 must be >= 0");
  const double n = direction.norm();
  if (n <= 0.0) throw std::invalid_argument("field axis must be nonzero");
  return FieldConfig{b0, direction / n};
}

}  // namespace quadtune

#endif
