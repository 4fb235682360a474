#include "quadtune/strain.hpp"

#include <cmath>

#include "quadtune/spin.hpp"

namespace quadtune {

namespace {
const Eigen::Vector3d axis_100(0.0, 0.0, 1.0);
const Eigen::Vector3d axis_111 = Eigen::Vector3d(1.0, 1.0, 1.0).normalized();

const Eigen::Vector3d& stack_axis(StackOrientation o) {
  return o == StackOrientation::s100 ? axis_100 : axis_111;
}
}  // namespace

double biaxial_perp_ratio(StackOrientation orientation, const StiffnessConstants& c) {
  if (!c.stable()) throw std::invalid_argument("stiffness constants violate elastic stability");
  if (orientation == StackOrientation::s100) return -2.0 * c.c12 / c.c11;
  // (111): sigma_perp = 0 in the rotated frame
  return -2.0 * (c.c11 + 2.0 * c.c12 - 2.0 * c.c44) / (c.c11 + 2.0 * c.c12 + 4.0 * c.c44);
}

Eigen::Matrix3d biaxial_thermal_strain(double eps_par, StackOrientation orientation,
                                       const StiffnessConstants& c) {
  const double eps_perp = biaxial_perp_ratio(orientation, c) * eps_par;
  return biaxial_thermal_strain(eps_par, eps_perp, orientation);
}

Eigen::Matrix3d biaxial_thermal_strain(double eps_par, double eps_perp,
                                       StackOrientation orientation) {
  if (std::abs(eps_par) >= 1e-2 || std::abs(eps_perp) >= 1e-2)
    throw std::invalid_argument("biaxial_thermal_strain: outside small-strain regime");
  return uniaxial_strain(eps_perp, eps_par, stack_axis(orientation));
}

Eigen::Matrix3d uniaxial_strain(double eps_long, double eps_trans, const Eigen::Vector3d& axis) {
  const double norm = axis.norm();
  if (norm <= 0.0) throw std::invalid_argument("uniaxial_strain: zero axis");
  const Eigen::Vector3d n = axis / norm;
  return eps_trans * Eigen::Matrix3d::Identity() + (eps_long - eps_trans) * (n * n.transpose());
}

Eigen::Matrix3d efg_from_strain(const Eigen::Matrix3d& eps, const GradientElasticTensor& s) {
  if ((eps - eps.transpose()).norm() > 1e-12 * std::max(eps.norm(), 1.0))
    throw std::invalid_argument("efg_from_strain: strain tensor must be symmetric");
  const double s12 = s.s12();
  const double shear = s.convention == ShearConvention::tensor ? s.s44 : 2.0 * s.s44;
  Eigen::Matrix3d v = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, l = (i + 2) % 3;
    v(i, i) = s.s11 * eps(i, i) + s12 * (eps(j, j) + eps(l, l));
  }
  v(0, 1) = v(1, 0) = shear * eps(0, 1);
  v(0, 2) = v(2, 0) = shear * eps(0, 2);
  v(1, 2) = v(2, 1) = shear * eps(1, 2);
  return v;
}

QuadrupoleCoupling coupling_fq(const Eigen::Matrix3d& efg, const SpinSystem& sys,
                               const PhysicalConstants& k) {
  if (std::abs(efg.trace()) > 1e-9 * std::max(efg.norm(), 1.0))
    throw std::invalid_argument("coupling_fq: EFG must be traceless");
  QuadrupoleCoupling out;
  if (efg.norm() == 0.0) {
    out.degenerate = true;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(efg);
  const Eigen::Vector3d vals = solver.eigenvalues();
  int imax = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(vals(i)) > std::abs(vals(imax))) imax = i;
  double gap = efg.norm();
  for (int i = 0; i < 3; ++i)
    if (i != imax) gap = std::min(gap, std::abs(std::abs(vals(i)) - std::abs(vals(imax))));
  out.fq_hz = k.e * sys.q * vals(imax) / k.h;
  out.axis = solver.eigenvectors().col(imax);
  out.degenerate = gap < 1e-9 * efg.norm();
  return out;
}

ExtractedS extract_s(double fq_100_hz, double fq_111_hz, const Eigen::Matrix3d& eps100,
                     const Eigen::Matrix3d& eps111, const SpinSystem& sys,
                     const PhysicalConstants& k, ShearConvention convention) {
  if (eps100.norm() == 0.0 || eps111.norm() == 0.0)
    throw std::invalid_argument("extract_s: zero strain input");

  // per-unit couplings: geometry g against component (S11=1, S44=0) / (0, 1)
  auto unit_fq = [&](const Eigen::Matrix3d& eps, bool use_s11) {
    GradientElasticTensor s;
    s.s11 = use_s11 ? 1.0 : 0.0;
    s.s44 = use_s11 ? 0.0 : 1.0;
    s.convention = convention;
    const Eigen::Matrix3d v = efg_from_strain(eps, s);
    if (v.norm() == 0.0) return 0.0;
    return coupling_fq(v, sys, k).fq_hz;
  };

  Eigen::Matrix2d a;
  a(0, 0) = unit_fq(eps100, true);
  a(0, 1) = unit_fq(eps100, false);
  a(1, 0) = unit_fq(eps111, true);
  a(1, 1) = unit_fq(eps111, false);
  if (std::abs(a.determinant()) <= 1e-12 * a.norm() * a.norm())
    throw std::invalid_argument("extract_s: singular geometry, strains do not separate S11/S44");

  const Eigen::Vector2d sol = a.fullPivLu().solve(Eigen::Vector2d(fq_100_hz, fq_111_hz));
  return ExtractedS{sol(0), sol(1)};
}

double piezo_shift_forecast(double eps, const GradientElasticTensor& s,
                            StackOrientation geometry, const SpinSystem& sys,
                            const PhysicalConstants& k) {
  if (std::abs(eps) >= 1e-3)
    throw std::invalid_argument("piezo_shift_forecast: strain outside linear regime");
  const Eigen::Matrix3d strain = uniaxial_strain(eps, 0.0, stack_axis(geometry));
  const Eigen::Matrix3d v = efg_from_strain(strain, s);
  if (v.norm() == 0.0) return 0.0;
  const double fq = coupling_fq(v, sys, k).fq_hz;
  // Full swing of the outer satellite as the drive strain goes -eps..+eps:
  // diagonalize at both signs of f_Q and difference the line positions.  A
  // Larmor frequency far above f_Q keeps the labels clean; the swing itself
  // is f0-independent to first order.
  const double f0 = 1e3 * std::abs(fq) + 1e6;
  const TransitionTable pos = transition_frequencies(build_axial_hamiltonian(sys, f0, fq, 0.0));
  const TransitionTable neg = transition_frequencies(build_axial_hamiltonian(sys, f0, -fq, 0.0));
  return std::abs(pos.outer_plus().frequency_hz - neg.outer_plus().frequency_hz);
}

}  // namespace quadtune
