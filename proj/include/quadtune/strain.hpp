#ifndef QUADTUNE_STRAIN_HPP
#define QUADTUNE_STRAIN_HPP

#include "quadtune/constants.hpp"

namespace quadtune {

// Cubic elastic constants; defaults are silicon.
struct StiffnessConstants {
  double c11 = 165.7e9;  // Pa
  double c12 = 63.9e9;
  double c44 = 79.6e9;

  bool stable() const { return c11 > std::abs(c12) && c44 > 0.0; }
};

enum class StackOrientation { s100, s111 };

// eps_perp / eps_par for a biaxially strained film with a free surface
// (zero normal stress).
double biaxial_perp_ratio(StackOrientation orientation, const StiffnessConstants& c = {});

// Strain tensor (crystal frame) of a film carrying in-plane strain eps_par,
// e.g. from the thermal mismatch against a cemented substrate.  The normal
// component follows from the zero-normal-stress condition; pass eps_perp
// explicitly to override it (the "equal strain in (111) stacks" assumption).
Eigen::Matrix3d biaxial_thermal_strain(double eps_par, StackOrientation orientation,
                                       const StiffnessConstants& c = {});
Eigen::Matrix3d biaxial_thermal_strain(double eps_par, double eps_perp,
                                       StackOrientation orientation);

// eps = eps_trans * Id + (eps_long - eps_trans) * n (x) n
Eigen::Matrix3d uniaxial_strain(double eps_long, double eps_trans, const Eigen::Vector3d& axis);

// Off-diagonal coupling convention: `tensor` maps V_ij = S44 eps_ij for the
// tensor shear strain; `engineering` uses the engineering shear gamma = 2 eps.
enum class ShearConvention { tensor, engineering };

// Gradient-elastic tensor of a cubic site: S12 = -S11/2 so that hydrostatic
// strain produces no EFG.
struct GradientElasticTensor {
  double s11 = 1.5e22;  // V/m^2 per unit strain
  double s44 = 6.8e22;
  ShearConvention convention = ShearConvention::tensor;

  double s12() const { return -0.5 * s11; }
};

// V_ii = S11 eps_ii + S12 (eps_jj + eps_kk); V_ij = S44 eps_ij (i != j).
// Traceless and symmetric by construction.
Eigen::Matrix3d efg_from_strain(const Eigen::Matrix3d& eps, const GradientElasticTensor& s);

struct QuadrupoleCoupling {
  double fq_hz = 0.0;          // e q V_n / h, sign of the principal value kept
  Eigen::Vector3d axis = {0, 0, 1};
  bool degenerate = false;     // principal values degenerate; axis arbitrary within subspace
};

// f_Q from the largest-magnitude principal value of the EFG.
QuadrupoleCoupling coupling_fq(const Eigen::Matrix3d& efg, const SpinSystem& sys,
                               const PhysicalConstants& k = {});

struct ExtractedS {
  double s11 = 0.0;
  double s44 = 0.0;
};

// Inverts coupling_fq(efg_from_strain(.)) on one [100]-type and one
// [111]-type geometry; exact on noiseless forward data.
ExtractedS extract_s(double fq_100_hz, double fq_111_hz, const Eigen::Matrix3d& eps100,
                     const Eigen::Matrix3d& eps111, const SpinSystem& sys,
                     const PhysicalConstants& k = {},
                     ShearConvention convention = ShearConvention::tensor);

// Peak-to-peak tuning range of an outer transition (theta = 0) for a bipolar
// piezo strain of amplitude eps applied along the given stack axis: the line
// moves by -+f_Q/2 at +-eps, so the accessible span is |f_Q(eps)|.
double piezo_shift_forecast(double eps, const GradientElasticTensor& s,
                            StackOrientation geometry, const SpinSystem& sys,
                            const PhysicalConstants& k = {});

}  // namespace quadtune

#endif
