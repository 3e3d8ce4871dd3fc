#include "turbcast/turbulence.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

namespace turbcast::turb {

namespace {

constexpr double kPi = std::numbers::pi;

double factorial(int n) { return std::tgamma(static_cast<double>(n) + 1.0); }

// R_n^m(rho), m = |m|
double radial_polynomial(int n, int m, double rho) {
  double value = 0.0;
  for (int k = 0; k <= (n - m) / 2; ++k) {
    const double c = ((k % 2) ? -1.0 : 1.0) * factorial(n - k) /
                     (factorial(k) * factorial((n + m) / 2 - k) * factorial((n - m) / 2 - k));
    value += c * std::pow(rho, n - 2 * k);
  }
  return value;
}

double noll_norm(const NollIndex& idx) {
  return idx.m == 0 ? std::sqrt(idx.n + 1.0) : std::sqrt(2.0 * (idx.n + 1.0));
}

}  // namespace

double fried_r0(double cn2, double lambda, double path_length) {
  if (cn2 <= 0.0 || lambda <= 0.0 || path_length <= 0.0)
    throw config_error("fried_r0: cn2, wavelength and path length must be positive");
  const double k = 2.0 * kPi / lambda;
  return std::pow(0.423 * k * k * cn2 * path_length, -3.0 / 5.0);
}

double TurbulenceStrength::fried_r0() const {
  return turb::fried_r0(cn2, lambda, path_length);
}

NollIndex noll_index(int j) {
  if (j < 1) throw config_error("Noll index starts at 1");
  const int n = static_cast<int>((-1.0 + std::sqrt(8.0 * (j - 1) + 1.0)) / 2.0);
  const int p = j - n * (n + 1) / 2;
  const int k = n % 2;
  const int m = ((p + k) / 2) * 2 - k;
  NollIndex idx;
  idx.n = n;
  idx.m = m;
  idx.cosine = (m == 0) || (j % 2 == 0);
  return idx;
}

op::RealMatrix zernike_eval(int j, const op::GridSpec& grid, double aperture_radius) {
  if (aperture_radius <= 0.0) throw config_error("aperture radius must be positive");
  const NollIndex idx = noll_index(j);
  const double norm = noll_norm(idx);
  op::RealMatrix out = op::RealMatrix::Zero(grid.n, grid.n);
  for (int iy = 0; iy < grid.n; ++iy) {
    const double y = grid.coord(iy);
    for (int ix = 0; ix < grid.n; ++ix) {
      const double x = grid.coord(ix);
      const double rho = std::sqrt(x * x + y * y) / aperture_radius;
      if (rho > 1.0) continue;
      double v = norm * radial_polynomial(idx.n, idx.m, rho);
      if (idx.m != 0) {
        const double theta = std::atan2(y, x);
        v *= idx.cosine ? std::cos(idx.m * theta) : std::sin(idx.m * theta);
      }
      out(iy, ix) = v;
    }
  }
  return out;
}

Eigen::MatrixXd zernike_covariance_unit(int j_max) {
  if (j_max < 2) throw config_error("j_max must be at least 2");
  const int count = j_max - 1;  // modes 2..j_max, piston excluded
  // Kolmogorov covariance of Noll coefficients; the leading constant is the
  // standard 0.0072 pi^(8/3) Gamma(14/3).
  const double kc = 0.0072 * std::pow(kPi, 8.0 / 3.0) * std::tgamma(14.0 / 3.0);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(count, count);
  for (int a = 0; a < count; ++a) {
    const NollIndex ia = noll_index(a + 2);
    for (int b = a; b < count; ++b) {
      const NollIndex ib = noll_index(b + 2);
      if (ia.m != ib.m || ia.cosine != ib.cosine) continue;
      const double ni = ia.n, nj = ib.n;
      const double sign = (((ia.n + ib.n - 2 * ia.m) / 2) % 2) ? -1.0 : 1.0;
      const double value = kc * sign * std::sqrt((ni + 1.0) * (nj + 1.0)) *
                           std::tgamma((ni + nj - 5.0 / 3.0) / 2.0) /
                           (std::tgamma((ni - nj + 17.0 / 3.0) / 2.0) *
                            std::tgamma((nj - ni + 17.0 / 3.0) / 2.0) *
                            std::tgamma((ni + nj + 23.0 / 3.0) / 2.0));
      cov(a, b) = value;
      cov(b, a) = value;
    }
  }
  return cov;
}

Eigen::VectorXd zernike_variances(int j_max, double d_eff, double r0) {
  if (d_eff <= 0.0 || r0 <= 0.0)
    throw config_error("zernike_variances: scales must be positive");
  return zernike_covariance_unit(j_max).diagonal() * std::pow(d_eff / r0, 5.0 / 3.0);
}

double ZernikeSpectrum::amplitude_scale(double r0) const {
  if (r0 <= 0.0) throw config_error("amplitude_scale: r0 must be positive");
  return std::pow(d_eff / r0, 5.0 / 6.0);
}

Eigen::VectorXd ZernikeSpectrum::sample(double scale, Rng& rng) const {
  const int count = j_max - 1;
  Eigen::VectorXd xi(count);
  for (int i = 0; i < count; ++i) xi[i] = rng.gaussian();
  if (independent) return scale * sigma_unit.cwiseProduct(xi);
  return scale * (chol_unit * xi);
}

ZernikeSpectrum make_spectrum(int j_max, double d_eff, bool independent) {
  ZernikeSpectrum spec;
  spec.j_max = j_max;
  spec.d_eff = d_eff;
  spec.independent = independent;
  spec.cov_unit = zernike_covariance_unit(j_max);
  Eigen::LLT<Eigen::MatrixXd> llt(spec.cov_unit);
  if (llt.info() != Eigen::Success)
    throw numeric_error("Zernike covariance is not positive definite");
  spec.chol_unit = llt.matrixL();
  spec.sigma_unit = spec.cov_unit.diagonal().cwiseSqrt();
  return spec;
}

PhaseScreen sample_screen(const ZernikeSpectrum& spectrum, double r0,
                          const op::GridSpec& grid, std::uint64_t seed,
                          bool render_phase) {
  Rng rng(seed);
  PhaseScreen screen;
  screen.coeffs = spectrum.sample(spectrum.amplitude_scale(r0), rng);
  screen.aperture_radius = spectrum.d_eff / 2.0;
  screen.seed = seed;
  if (render_phase) {
    ZernikeStack stack(grid, screen.aperture_radius, spectrum.j_max);
    screen.phase = stack.render(screen.coeffs);
  }
  return screen;
}

ZernikeStack::ZernikeStack(const op::GridSpec& grid, double aperture_radius, int j_max)
    : grid_(grid), radius_(aperture_radius), j_max_(j_max) {
  if (aperture_radius <= 0.0) throw config_error("aperture radius must be positive");
  if (j_max < 2) throw config_error("j_max must be at least 2");
  const double r2max = radius_ * radius_;
  for (int iy = 0; iy < grid_.n; ++iy) {
    const double y = grid_.coord(iy);
    for (int ix = 0; ix < grid_.n; ++ix) {
      const double x = grid_.coord(ix);
      if (x * x + y * y <= r2max)
        pixel_.push_back(static_cast<std::int32_t>(iy) * grid_.n + ix);
    }
  }
  const int count = j_max_ - 1;
  values_.resize(static_cast<Eigen::Index>(pixel_.size()), count);
  for (int j = 2; j <= j_max_; ++j) {
    const NollIndex idx = noll_index(j);
    const double norm = noll_norm(idx);
    for (std::size_t p = 0; p < pixel_.size(); ++p) {
      const int iy = pixel_[p] / grid_.n, ix = pixel_[p] % grid_.n;
      const double x = grid_.coord(ix), y = grid_.coord(iy);
      const double rho = std::sqrt(x * x + y * y) / radius_;
      double v = norm * radial_polynomial(idx.n, idx.m, rho);
      if (idx.m != 0) {
        const double theta = std::atan2(y, x);
        v *= idx.cosine ? std::cos(idx.m * theta) : std::sin(idx.m * theta);
      }
      values_(static_cast<Eigen::Index>(p), j - 2) = v;
    }
  }
}

op::RealMatrix ZernikeStack::render(const Eigen::VectorXd& coeffs) const {
  if (coeffs.size() != values_.cols())
    throw numeric_error("ZernikeStack: coefficient count mismatch");
  const Eigen::VectorXd phase = values_ * coeffs;
  op::RealMatrix out = op::RealMatrix::Zero(grid_.n, grid_.n);
  for (std::size_t p = 0; p < pixel_.size(); ++p)
    out.data()[pixel_[p]] = phase[static_cast<Eigen::Index>(p)];
  return out;
}

void ZernikeStack::apply(op::ComplexField& field, const Eigen::VectorXd& coeffs) const {
  if (coeffs.size() != values_.cols())
    throw numeric_error("ZernikeStack: coefficient count mismatch");
  if (field.grid.n != grid_.n)
    throw numeric_error("ZernikeStack: grid mismatch");
  const Eigen::VectorXd phase = values_ * coeffs;
  op::Complex* data = field.a.data();
  for (std::size_t p = 0; p < pixel_.size(); ++p) {
    const double ph = phase[static_cast<Eigen::Index>(p)];
    data[pixel_[p]] *= op::Complex(std::cos(ph), std::sin(ph));
  }
}

op::ComplexField apply_screen(const op::ComplexField& field, const op::RealMatrix& phase) {
  if (phase.rows() != field.a.rows() || phase.cols() != field.a.cols())
    throw numeric_error("apply_screen: phase grid mismatch");
  op::ComplexField out = field;
  for (Eigen::Index i = 0; i < out.a.size(); ++i) {
    const double ph = phase.data()[i];
    out.a.data()[i] *= op::Complex(std::cos(ph), std::sin(ph));
  }
  return out;
}

}  // namespace turbcast::turb
