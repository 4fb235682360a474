#include "quadtune/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "quadtune/spin.hpp"

namespace quadtune {

namespace {
Eigen::VectorXd clamp_to_bounds(const FitProblem& prob, Eigen::VectorXd p) {
  if (prob.lower.size()) p = p.cwiseMax(prob.lower);
  if (prob.upper.size()) p = p.cwiseMin(prob.upper);
  return p;
}

Eigen::VectorXd residuals(const FitProblem& prob, const Eigen::VectorXd& p) {
  const size_t n = prob.x.size();
  Eigen::VectorXd r(n);
  for (size_t i = 0; i < n; ++i) {
    const double w = prob.sigma.empty() ? 1.0 : 1.0 / prob.sigma[i];
    r(i) = (prob.y[i] - prob.f(p, prob.x[i])) * w;
  }
  return r;
}

// d(residual)/d(params) by central differences
Eigen::MatrixXd jacobian(const FitProblem& prob, const Eigen::VectorXd& p) {
  const size_t n = prob.x.size();
  const int np = static_cast<int>(p.size());
  Eigen::MatrixXd j(n, np);
  for (int k = 0; k < np; ++k) {
    const double h = std::max(1e-6 * std::abs(p(k)), 1e-9);
    Eigen::VectorXd pp = p, pm = p;
    pp(k) += h;
    pm(k) -= h;
    for (size_t i = 0; i < n; ++i) {
      const double w = prob.sigma.empty() ? 1.0 : 1.0 / prob.sigma[i];
      j(i, k) = -(prob.f(pp, prob.x[i]) - prob.f(pm, prob.x[i])) / (2.0 * h) * w;
    }
  }
  return j;
}
}  // namespace

void FitProblem::validate() const {
  const int np = static_cast<int>(initial.size());
  if (np == 0) throw std::invalid_argument("fit needs at least one parameter");
  if (names.size() != static_cast<size_t>(np))
    throw std::invalid_argument("parameter names and initial values disagree in length");
  if ((lower.size() && lower.size() != np) || (upper.size() && upper.size() != np))
    throw std::invalid_argument("bounds must match the parameter count");
  for (int k = 0; k < np; ++k) {
    if (lower.size() && initial(k) < lower(k))
      throw std::invalid_argument("initial value below lower bound");
    if (upper.size() && initial(k) > upper(k))
      throw std::invalid_argument("initial value above upper bound");
  }
  if (x.size() != y.size() || (!sigma.empty() && sigma.size() != x.size()))
    throw std::invalid_argument("data arrays must have equal length");
  if (x.size() < static_cast<size_t>(np))
    throw std::invalid_argument("fewer data points than parameters");
  for (size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw std::invalid_argument("fit data must be finite");
    if (!sigma.empty() && !(sigma[i] > 0.0))
      throw std::invalid_argument("sigmas must be > 0");
  }
  if (!f) throw std::invalid_argument("fit problem has no model function");
}

FitResult least_squares(const FitProblem& prob) {
  prob.validate();
  const int np = static_cast<int>(prob.initial.size());
  const size_t n = prob.x.size();

  FitResult res;
  res.model = prob.model;
  res.names = prob.names;

  Eigen::VectorXd p = clamp_to_bounds(prob, prob.initial);
  Eigen::VectorXd r = residuals(prob, p);
  double loss = r.squaredNorm();
  double lambda = 1e-3;

  for (int iter = 0; iter < prob.max_iterations; ++iter) {
    res.iterations = iter + 1;
    const Eigen::MatrixXd j = jacobian(prob, p);
    const Eigen::VectorXd g = j.transpose() * r;
    if (g.norm() < 1e-8) {
      res.converged = true;
      break;
    }
    const Eigen::MatrixXd a = j.transpose() * j;
    for (int k = 0; k < np; ++k) {
      if (!(a(k, k) > 0.0)) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "parameter '%s' has no effect on the model (singular normal "
                      "equations)",
                      prob.names[k].c_str());
        throw std::runtime_error(msg);
      }
    }

    bool accepted = false;
    while (lambda <= 1e12) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += lambda * a.diagonal();
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      const Eigen::VectorXd cand = clamp_to_bounds(prob, p + step);
      const Eigen::VectorXd rc = residuals(prob, cand);
      const double lc = rc.squaredNorm();
      if (std::isfinite(lc) && lc <= loss) {
        const double drop = loss - lc;
        p = cand;
        r = rc;
        loss = lc;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (drop <= 1e-10 * std::max(loss, 1e-300)) res.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted || res.converged) break;
  }

  res.estimate = p;
  res.residual_norm = std::sqrt(loss);

  // linearized covariance, scaled by the residual variance
  const Eigen::MatrixXd j = jacobian(prob, p);
  const Eigen::MatrixXd a = j.transpose() * j;
  const double dof = static_cast<double>(n) - np;
  const double s2 = dof > 0.0 ? loss / dof : 0.0;
  const auto ldlt = a.ldlt();
  res.sigma = Eigen::VectorXd::Zero(np);
  if (ldlt.info() == Eigen::Success) {
    const Eigen::MatrixXd cov = s2 * ldlt.solve(Eigen::MatrixXd::Identity(np, np));
    for (int k = 0; k < np; ++k) res.sigma(k) = std::sqrt(std::max(cov(k, k), 0.0));
  }
  return res;
}

FitResult fit_gn(const std::vector<Spectrum>& spectra, const std::vector<double>& b0_t,
                 const SpinSystem& sys, const PhysicalConstants& k) {
  if (spectra.size() != b0_t.size())
    throw std::invalid_argument("fit_gn needs one static field per spectrum");
  if (spectra.size() < 2)
    throw std::invalid_argument("fit_gn needs at least two spectra");

  FitProblem prob;
  prob.model = "gn_spectra";
  prob.names = {"g_n"};
  prob.initial = Eigen::VectorXd::Constant(1, sys.g_n_free);
  prob.lower = Eigen::VectorXd::Constant(1, 0.1);
  prob.upper = Eigen::VectorXd::Constant(1, 10.0);
  for (size_t i = 0; i < spectra.size(); ++i) {
    const auto peaks = peak_positions(spectra[i]);
    if (peaks.size() != 1) {
      char msg[120];
      std::snprintf(msg, sizeof msg,
                    "fit_gn expects single-dip spectra; spectrum %zu has %zu dips", i,
                    peaks.size());
      throw std::invalid_argument(msg);
    }
    if (!(b0_t[i] > 0.0)) throw std::invalid_argument("static fields must be > 0");
    prob.x.push_back(b0_t[i]);
    prob.y.push_back(peaks[0].center_hz);
  }
  const double mu_h = k.mu_n / k.h;
  prob.f = [mu_h](const Eigen::VectorXd& p, double b) { return p(0) * mu_h * b; };

  FitResult res = least_squares(prob);

  // chemical shift against the free-nucleus reference, in percent
  const double g = res.estimate(0);
  res.names.push_back("chemical_shift_pct");
  res.estimate.conservativeResize(2);
  res.sigma.conservativeResize(2);
  res.estimate(1) = (g / sys.g_n_free - 1.0) * 100.0;
  res.sigma(1) = res.sigma(0) / sys.g_n_free * 100.0;
  return res;
}

FitResult fit_fq_angular(const std::vector<std::pair<double, double>>& shifts,
                         int order, double f0_hz, const SpinSystem& sys) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("fit_fq_angular order must be 1 or 2");
  if (shifts.size() < 4)
    throw std::invalid_argument("fit_fq_angular needs at least 4 angles");
  if (!(f0_hz > 0.0)) throw std::invalid_argument("f0 must be > 0");

  double th_min = shifts[0].first, th_max = shifts[0].first;
  double p2_best = 0.0;
  size_t i_best = 0;
  for (size_t i = 0; i < shifts.size(); ++i) {
    const double th = shifts[i].first;
    th_min = std::min(th_min, th);
    th_max = std::max(th_max, th);
    const double c = std::cos(th);
    const double p2 = 0.5 * (3.0 * c * c - 1.0);
    if (std::abs(p2) > std::abs(p2_best)) {
      p2_best = p2;
      i_best = i;
    }
  }
  if (th_max - th_min < M_PI / 3.0 - 1e-9)
    throw std::invalid_argument("fit_fq_angular needs angles spanning >= 60 degrees");
  if (std::abs(p2_best) < 0.05)
    throw std::invalid_argument(
        "all angles lie near the magic angle; f_Q is unconstrained");

  FitProblem prob;
  prob.model = order == 1 ? "fq_angular_outer" : "fq_angular_inner";
  prob.names = {"f_Q"};
  for (const auto& [th, df] : shifts) {
    prob.x.push_back(th);
    prob.y.push_back(df);
  }
  double fq0;
  if (order == 1) {
    // outer+ shifts by -(f_Q/2) P2(cos theta) at first order
    fq0 = -2.0 * shifts[i_best].second / p2_best;
  } else {
    // inner shift is quadratic in f_Q; sign not identifiable
    double ymax = 0.0;
    for (const auto& [th, df] : shifts) ymax = std::max(ymax, std::abs(df));
    fq0 = std::sqrt(64.0 * f0_hz * ymax / 3.0);
    prob.lower = Eigen::VectorXd::Constant(1, 0.0);
  }
  prob.initial = Eigen::VectorXd::Constant(1, fq0);
  prob.f = [order, f0_hz, sys](const Eigen::VectorXd& p, double th) {
    const auto table =
        transition_frequencies(build_axial_hamiltonian(sys, f0_hz, p(0), th));
    const Transition& line = order == 1 ? table.outer_plus() : table.inner();
    return line.frequency_hz - f0_hz;
  };
  return least_squares(prob);
}

FitResult fit_scaling(const std::vector<std::pair<double, double>>& t2_points) {
  if (t2_points.size() < 2)
    throw std::invalid_argument("fit_scaling needs at least 2 points");

  FitProblem prob;
  prob.model = "t2_scaling";
  prob.names = {"exponent", "log_prefactor"};
  for (const auto& [n, t2] : t2_points) {
    if (!(n >= 1.0) || !(t2 > 0.0))
      throw std::invalid_argument("fit_scaling needs n >= 1 and T2 > 0");
    prob.x.push_back(std::log(n));
    prob.y.push_back(std::log(t2));
  }
  const double lx_min = *std::min_element(prob.x.begin(), prob.x.end());
  const double lx_max = *std::max_element(prob.x.begin(), prob.x.end());
  if (!(lx_max - lx_min > 0.0))
    throw std::invalid_argument("fit_scaling needs at least two distinct n");

  // linear model: any starting point lands in one Gauss-Newton step
  prob.initial = Eigen::VectorXd(2);
  prob.initial << 0.0,
      std::accumulate(prob.y.begin(), prob.y.end(), 0.0) / prob.y.size();
  prob.f = [](const Eigen::VectorXd& p, double lx) { return p(1) + p(0) * lx; };

  FitResult res = least_squares(prob);

  // report the prefactor in linear units alongside the exponent
  res.names[1] = "prefactor";
  const double lna = res.estimate(1);
  res.estimate(1) = std::exp(lna);
  res.sigma(1) = res.estimate(1) * res.sigma(1);
  return res;
}

}  // namespace quadtune
