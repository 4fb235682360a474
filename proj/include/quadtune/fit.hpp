#ifndef QUADTUNE_FIT_HPP
#define QUADTUNE_FIT_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "quadtune/constants.hpp"
#include "quadtune/endor.hpp"

namespace quadtune {

// Scalar-model nonlinear least-squares problem: y_i ~ f(params, x_i) with
// optional per-point sigma (empty = unit weights).
struct FitProblem {
  std::string model;
  std::vector<std::string> names;
  Eigen::VectorXd initial;
  Eigen::VectorXd lower, upper;  // size 0 = unbounded
  std::vector<double> x, y, sigma;
  std::function<double(const Eigen::VectorXd&, double)> f;
  int max_iterations = 200;

  void validate() const;
};

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  Eigen::VectorXd estimate;
  Eigen::VectorXd sigma;       // 1-sigma, residual-scaled normal-equations covariance
  double residual_norm = 0.0;  // weighted ||r|| at the estimate
  int iterations = 0;
  bool converged = false;
};

// Damped Gauss-Newton (Levenberg-Marquardt): lambda starts at 1e-3 on the
// diagonal of J^T J, x10 on rejection, /10 on acceptance; bounds enforced by
// projection; central-difference Jacobian with step max(1e-6 |p|, 1e-9).
// Converges on relative loss change < 1e-10 or gradient norm < 1e-8.
FitResult least_squares(const FitProblem& problem);

// g_n from the dip centers of single-dip spectra at known static fields:
// f0(B0) = mu_n g_n B0 / h. Also reports the chemical shift (%) against the
// free-nucleus g_n reference. Multi-dip spectra are rejected.
FitResult fit_gn(const std::vector<Spectrum>& spectra, const std::vector<double>& b0_t,
                 const SpinSystem& sys = {}, const PhysicalConstants& k = {});

// f_Q from angular line-shift data (theta_rad, shift_hz). order 1 fits the
// outer+ line (linear in f_Q), order 2 the inner line (quadratic); both use
// the exact-diagonalization frequencies, not the perturbative formulas.
FitResult fit_fq_angular(const std::vector<std::pair<double, double>>& shifts,
                         int order, double f0_hz, const SpinSystem& sys = {});

// T2 = A n^k from (n, T2) points via a log-log linear fit.
FitResult fit_scaling(const std::vector<std::pair<double, double>>& t2_points);

}  // namespace quadtune

#endif
