#include "quadtune/spin.hpp"

#include <algorithm>
#include <cmath>

namespace quadtune {

using std::complex;

SpinOperators spin_operators(double spin) {
  if (!is_half_integer_spin(spin))
    throw std::invalid_argument("spin_operators: I must be a positive half-integer");
  const int dim = static_cast<int>(std::lround(2.0 * spin + 1.0));
  SpinOperators ops;
  ops.dim = dim;
  ops.ix = Eigen::MatrixXcd::Zero(dim, dim);
  ops.iy = Eigen::MatrixXcd::Zero(dim, dim);
  ops.iz = Eigen::MatrixXcd::Zero(dim, dim);

  // row r holds m = I - r
  for (int r = 0; r < dim; ++r) {
    const double m = spin - r;
    ops.iz(r, r) = m;
    if (r + 1 < dim) {
      // <m|I_+|m-1> = sqrt(I(I+1) - m(m-1)), connecting row r to row r+1
      const double c = 0.5 * std::sqrt(spin * (spin + 1.0) - m * (m - 1.0));
      ops.ix(r, r + 1) = c;
      ops.ix(r + 1, r) = c;
      ops.iy(r, r + 1) = complex<double>(0.0, -c);
      ops.iy(r + 1, r) = complex<double>(0.0, c);
    }
  }
  return ops;
}

double larmor_frequency(const SpinSystem& sys, const FieldConfig& field,
                        const PhysicalConstants& k) {
  if (field.b0 < 0.0) throw std::invalid_argument("larmor_frequency: B0 must be >= 0");
  return k.mu_n * sys.g_n * field.b0 / k.h;
}

NuclearHamiltonian build_hamiltonian(const SpinSystem& sys, double f0_hz,
                                     const Eigen::Matrix3d& efg, const PhysicalConstants& k) {
  check_spin(sys);
  const double norm = efg.norm();
  if ((efg - efg.transpose()).norm() > 1e-9 * std::max(norm, 1.0))
    throw std::invalid_argument("build_hamiltonian: EFG must be symmetric");
  if (std::abs(efg.trace()) > 1e-9 * std::max(norm, 1.0))
    throw std::invalid_argument("build_hamiltonian: EFG must be traceless");

  const SpinOperators ops = spin_operators(sys.spin);
  const double spin = sys.spin;
  NuclearHamiltonian h;
  h.dim = ops.dim;
  h.matrix = -f0_hz * ops.iz;

  if (sys.q != 0.0 && norm > 0.0 && spin >= 1.0) {
    const double scale = k.e * sys.q / (4.0 * spin * (2.0 * spin - 1.0) * k.h);
    const Eigen::MatrixXcd* op[3] = {&ops.ix, &ops.iy, &ops.iz};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (efg(i, j) != 0.0)
          h.matrix += scale * efg(i, j) * ((*op[i]) * (*op[j]) + (*op[j]) * (*op[i]));
  }
  return h;
}

NuclearHamiltonian build_axial_hamiltonian(const SpinSystem& sys, double f0_hz, double fq_hz,
                                           double theta_rad) {
  check_spin(sys);
  const SpinOperators ops = spin_operators(sys.spin);
  const double spin = sys.spin;
  NuclearHamiltonian h;
  h.dim = ops.dim;
  h.matrix = -f0_hz * ops.iz;
  if (fq_hz != 0.0 && spin >= 1.0) {
    const Eigen::MatrixXcd in = std::cos(theta_rad) * ops.iz + std::sin(theta_rad) * ops.ix;
    const Eigen::MatrixXcd quad =
        3.0 * in * in -
        spin * (spin + 1.0) * Eigen::MatrixXcd::Identity(ops.dim, ops.dim);
    h.matrix += fq_hz / (4.0 * spin * (2.0 * spin - 1.0)) * quad;
  }
  return h;
}

Eigensystem eigensystem(const NuclearHamiltonian& h) {
  const double scale = h.matrix.cwiseAbs().maxCoeff();
  if ((h.matrix - h.matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * std::max(scale, 1.0))
    throw std::invalid_argument("eigensystem: Hamiltonian is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h.matrix);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigensystem: diagonalization failed");
  return Eigensystem{solver.eigenvalues(), solver.eigenvectors()};
}

const Transition& TransitionTable::by_m(double m_hi) const {
  for (const auto& t : lines)
    if (std::abs(t.m_hi - m_hi) < 0.25) return t;
  throw std::out_of_range("TransitionTable: no transition with requested m_hi");
}

double transition_label_m_hi(const std::string& label) {
  if (label == "inner") return 0.5;
  if (label == "outer+") return 1.5;
  if (label == "outer-") return -0.5;
  throw std::invalid_argument("unknown transition label '" + label +
                              "' (expected inner, outer+ or outer-)");
}

std::string transition_m_label(double m_hi) {
  if (std::abs(m_hi - 1.5) < 0.25) return "outer+";
  if (std::abs(m_hi - 0.5) < 0.25) return "inner";
  if (std::abs(m_hi + 0.5) < 0.25) return "outer-";
  return "m_hi=" + std::to_string(m_hi);
}

TransitionTable transition_frequencies(const NuclearHamiltonian& h) {
  const double spin = 0.5 * (h.dim - 1);
  return transition_frequencies(h, spin_operators(spin));
}

TransitionTable transition_frequencies(const NuclearHamiltonian& h, const SpinOperators& ops) {
  const Eigensystem es = eigensystem(h);
  const int dim = h.dim;
  const double spin = 0.5 * (dim - 1);

  // label eigenstates by dominant I_z character
  std::vector<int> state_of_row(dim, -1);  // basis row -> eigenstate index
  std::vector<double> overlap(dim, 0.0);
  bool ambiguous = false;
  std::vector<bool> taken(dim, false);
  for (int r = 0; r < dim; ++r) {
    int best = -1;
    double best_w = -1.0;
    for (int k = 0; k < dim; ++k) {
      if (taken[k]) continue;
      const double w = std::norm(es.vectors(r, k));
      if (w > best_w) {
        best_w = w;
        best = k;
      }
    }
    state_of_row[r] = best;
    overlap[r] = best_w;
    taken[best] = true;
    if (best_w < 0.6) ambiguous = true;
  }
  if (ambiguous) {
    // strong mixing: m labels are nominal, pair states by eigenvalue order
    // (ascending eigenvalue corresponds to descending m for f0 >> f_Q)
    for (int r = 0; r < dim; ++r) state_of_row[r] = r;
  }

  TransitionTable table;
  table.ambiguous = ambiguous;
  for (int r = 0; r + 1 < dim; ++r) {
    const int hi = state_of_row[r];       // state labeled m = spin - r
    const int lo = state_of_row[r + 1];   // state labeled m - 1
    Transition t;
    t.m_hi = spin - r;
    t.m_lo = t.m_hi - 1.0;
    t.frequency_hz = es.values(lo) - es.values(hi);
    t.dipole_weight =
        std::norm((es.vectors.col(lo).adjoint() * ops.ix * es.vectors.col(hi))(0, 0));
    t.overlap = std::min(overlap[r], overlap[r + 1]);
    t.hi_index = hi;
    t.lo_index = lo;
    table.lines.push_back(t);
  }
  return table;
}

namespace {
inline double p2_cos(double theta) {
  const double c = std::cos(theta);
  return 0.5 * (3.0 * c * c - 1.0);
}
}  // namespace

namespace {
// m_hi labels the line m_hi <-> m_hi-1; fold the alias -3/2 (low satellite
// named by its lower level) onto the canonical -1/2 label.
inline double canonical_m_hi(double m_hi) {
  return std::abs(m_hi + 1.5) < 0.25 ? -0.5 : m_hi;
}
}  // namespace

double first_order_shift(double fq_hz, double theta_rad, double m_hi) {
  const double m = canonical_m_hi(m_hi);
  return 0.25 * fq_hz * (1.0 - 2.0 * m) * p2_cos(theta_rad);
}

double second_order_shift(double fq_hz, double f0_hz, double theta_rad, double m_hi) {
  const double c2 = std::cos(theta_rad) * std::cos(theta_rad);
  const double s2 = 1.0 - c2;
  if (std::abs(canonical_m_hi(m_hi) - 0.5) < 0.25)  // central line
    return -3.0 * fq_hz * fq_hz / (64.0 * f0_hz) * s2 * (9.0 * c2 - 1.0);
  return 3.0 * fq_hz * fq_hz / (8.0 * f0_hz) * s2 * c2;  // satellites
}

std::vector<AngularShift> angular_sweep(const SpinSystem& sys, double f0_hz, double fq_hz,
                                        int n_points, double theta_lo_rad, double theta_hi_rad) {
  if (n_points < 2) throw std::invalid_argument("angular_sweep: need at least 2 points");
  std::vector<AngularShift> out;
  out.reserve(3 * static_cast<size_t>(n_points));
  const double step = (theta_hi_rad - theta_lo_rad) / (n_points - 1);
  const double m_his[3] = {1.5, 0.5, -0.5};
  for (int i = 0; i < n_points; ++i) {
    const double theta = theta_lo_rad + i * step;
    const TransitionTable table =
        transition_frequencies(build_axial_hamiltonian(sys, f0_hz, fq_hz, theta));
    for (double m : m_his) {
      AngularShift p;
      p.theta_rad = theta;
      p.m_hi = m;
      p.exact_hz = table.by_m(m).frequency_hz - f0_hz;
      p.perturbative_hz =
          first_order_shift(fq_hz, theta, m) + second_order_shift(fq_hz, f0_hz, theta, m);
      out.push_back(p);
    }
  }
  return out;
}

Eigen::Matrix3d rotation_to_z(const Eigen::Vector3d& axis) {
  const double n = axis.norm();
  if (n <= 0.0) throw std::invalid_argument("rotation_to_z: zero axis");
  const Eigen::Vector3d z = axis / n;
  // complete to a right-handed orthonormal triad (x', y', z)
  Eigen::Vector3d seed = std::abs(z.z()) < 0.9 ? Eigen::Vector3d(0, 0, 1) : Eigen::Vector3d(1, 0, 0);
  const Eigen::Vector3d x = (seed - seed.dot(z) * z).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  return r;
}

}  // namespace quadtune
