#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "turbcast/common.hpp"
#include "turbcast/optics.hpp"

namespace turbcast::turb {

struct TurbulenceStrength {
  double cn2 = 1e-16;        // m^(-2/3)
  double lambda = 810e-9;    // m
  double path_length = 5400; // m

  double fried_r0() const;
};

// Plane-wave Fried parameter r0 = (0.423 k^2 Cn2 L)^(-3/5).
double fried_r0(double cn2, double lambda, double path_length);

struct NollIndex {
  int n = 0;       // radial order
  int m = 0;       // azimuthal order, >= 0
  bool cosine = true;  // azimuthal parity for m != 0 (even j = cosine)
};

NollIndex noll_index(int j);  // j >= 1, piston = 1

// Noll-normalized Zernike polynomial sampled over the disk of the given
// radius (unit variance over the disk); zero outside.
op::RealMatrix zernike_eval(int j, const op::GridSpec& grid, double aperture_radius);

// Kolmogorov covariance of Zernike coefficients j = 2..j_max at
// (d_eff/r0)^(5/3) = 1. Entries vanish unless azimuthal order and parity
// match.
Eigen::MatrixXd zernike_covariance_unit(int j_max);

// Per-mode variances sigma_j^2 (rad^2) for j = 2..j_max.
Eigen::VectorXd zernike_variances(int j_max, double d_eff, double r0);

// Coefficient statistics ready for sampling. The unit-scale Cholesky factor
// is cached so ensembles can share base draws across turbulence levels.
struct ZernikeSpectrum {
  int j_max = 36;
  double d_eff = 0.30;
  bool independent = false;  // ignore same-order cross-covariances
  Eigen::MatrixXd cov_unit;
  Eigen::MatrixXd chol_unit;   // lower-triangular factor of cov_unit
  Eigen::VectorXd sigma_unit;  // sqrt of diagonal, for independent sampling

  // amplitude_scale = (d_eff/r0)^(5/6)
  double amplitude_scale(double r0) const;
  Eigen::VectorXd sample(double amplitude_scale, Rng& rng) const;
};

ZernikeSpectrum make_spectrum(int j_max, double d_eff, bool independent = false);

struct PhaseScreen {
  Eigen::VectorXd coeffs;       // a_j in rad, j = 2..j_max
  double aperture_radius = 0;   // disk over which the Zernikes are defined
  std::uint64_t seed = 0;
  op::RealMatrix phase;         // sampled phase, filled by render()
};

PhaseScreen sample_screen(const ZernikeSpectrum& spectrum, double r0,
                          const op::GridSpec& grid, std::uint64_t seed,
                          bool render_phase = true);

// Precomputed Zernike values over the aperture-disk pixels of a grid; turns
// coefficient vectors into phases without re-evaluating polynomials.
class ZernikeStack {
 public:
  ZernikeStack(const op::GridSpec& grid, double aperture_radius, int j_max);

  const op::GridSpec& grid() const { return grid_; }
  double aperture_radius() const { return radius_; }
  int j_max() const { return j_max_; }

  op::RealMatrix render(const Eigen::VectorXd& coeffs) const;
  // field *= exp(i phase); touches only pixels inside the disk.
  void apply(op::ComplexField& field, const Eigen::VectorXd& coeffs) const;

 private:
  op::GridSpec grid_;
  double radius_;
  int j_max_;
  std::vector<std::int32_t> pixel_;  // flat row-major indices inside the disk
  Eigen::MatrixXd values_;           // n_pixels x (j_max - 1)
};

// Pointwise multiply by e^{i phase}; conserves power exactly.
op::ComplexField apply_screen(const op::ComplexField& field, const op::RealMatrix& phase);

}  // namespace turbcast::turb
