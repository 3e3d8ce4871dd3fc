#pragma once

#include <Eigen/Core>
#include <complex>
#include <filesystem>
#include <vector>

namespace turbcast::op {

using Complex = std::complex<double>;
// Row-major so the buffer layout matches FFTW's 2-D convention directly.
using FieldMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Square sampling window. Pixel centers sit at (i + 0.5 - n/2) * pitch, so the
// grid is symmetric about the axis and no sample lies exactly at r = 0.
struct GridSpec {
  double window_m = 1.2;
  int n = 1024;

  double pitch() const { return window_m / n; }
  double coord(int idx) const { return (idx + 0.5 - 0.5 * n) * pitch(); }
};

struct BeamParams {
  double w0 = 0.08;          // beam waist at z = 0, m
  double lambda = 810e-9;    // wavelength, m
  double path_length = 5400; // channel length L, m
  double aperture = 0.30;    // receiver aperture D, m

  double wavenumber() const { return 2.0 * 3.14159265358979323846 / lambda; }
  double rayleigh_range() const {
    return 3.14159265358979323846 * w0 * w0 / lambda;
  }
};

// w(z) = w0 sqrt(1+z^2/zR^2); R(z) = z (1+zR^2/z^2), infinite at z = 0;
// gouy_angle = arctan(z/zR). The Gouy phase of an l-mode is
// (|l|+1) * gouy_angle.
struct BeamGeometry {
  double w = 0;
  double radius = 0;  // +inf at z = 0 (flat phase)
  double gouy_angle = 0;

  double curvature() const { return std::isinf(radius) ? 0.0 : 1.0 / radius; }
};

BeamGeometry beam_geometry(double z, const BeamParams& params);

struct ComplexField {
  GridSpec grid;
  double z = 0;
  FieldMatrix a;

  double power() const;  // discrete L2 norm squared (pixel-area weighted)
};

struct ModeLabel {
  enum class Basis { oam, angle };
  Basis basis = Basis::oam;
  int index = 0;  // OAM: l in {-d/2..d/2}\{0}; ANGLE: j in {0..d-1}

  static ModeLabel oam(int l, int d = 8);
  static ModeLabel angle(int j, int d = 8);
};

// OAM alphabet {-d/2,...,-1, 1,...,d/2}; l = 0 is excluded from the basis.
std::vector<int> oam_alphabet(int d = 8);

// ANGLE superposition coefficients: column j holds the amplitudes of the OAM
// modes (alphabet order) in |phi_j> = (1/sqrt(d)) sum_l e^{2 pi i j g(l)/d} |l>.
Eigen::MatrixXcd angle_coefficients(int d = 8);
int angle_mode_slot(int l, int d = 8);  // g(l)

// Laguerre-Gauss mode with radial index p = 0, unit discrete norm.
// Phase convention: e^{-i l phi}, e^{-i k r^2 / 2R(z)}, e^{+i (|l|+1) gouy}.
ComplexField lg_mode(int l, double z, const BeamParams& params, const GridSpec& grid);

ComplexField angle_mode(int j, double z, const BeamParams& params, const GridSpec& grid,
                        int d = 8);

struct PropagationInfo {
  long evanescent_zeroed = 0;
};

// Angular-spectrum propagation over dz with the exact vacuum transfer
// function; the plane-wave phase e^{-i k dz} is factored out so a constant
// field propagates to itself.
ComplexField propagate(const ComplexField& field, double dz, const BeamParams& params,
                       PropagationInfo* info = nullptr);

struct ApertureResult {
  ComplexField field;
  double transmitted_fraction = 0;
};

ApertureResult apply_aperture(const ComplexField& field, double diameter);

// Discrete inner product sum(conj(a) * b) * pixel_area.
Complex overlap(const ComplexField& a, const ComplexField& b);

// Effective radius from the second moment: w = sqrt(2 <r^2> / (|l|+1)).
double fitted_beam_radius(const ComplexField& field, int l);

// Intensity centroid (x, y).
std::pair<double, double> centroid(const ComplexField& field);

// Flat binary dump (interleaved re,im doubles, row-major) + JSON sidecar.
void dump_field(const std::filesystem::path& path, const ComplexField& field,
                const std::string& sidecar_extra_json = "");

}  // namespace turbcast::op
