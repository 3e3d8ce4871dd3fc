#include "turbcast/optics.hpp"

#include <fftw3.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>

#include "turbcast/common.hpp"
#include "turbcast/csv.hpp"

namespace turbcast::op {

namespace {

constexpr double kPi = std::numbers::pi;

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// One reusable in-place c2c transform per grid size. Plans are created with
// FFTW_ESTIMATE: measured plans can differ between runs, which would break
// bit-level reproducibility.
class Fft2d {
 public:
  explicit Fft2d(int n) : n_(n) {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n * n));
    if (!buf_) throw numeric_error("fftw_malloc failed");
    fwd_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Fft2d() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(buf_);
  }
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  Complex* data() { return reinterpret_cast<Complex*>(buf_); }
  void forward() { fftw_execute(fwd_); }
  void inverse() { fftw_execute(inv_); }
  int n() const { return n_; }

 private:
  int n_;
  fftw_complex* buf_;
  fftw_plan fwd_, inv_;
};

thread_local std::unique_ptr<Fft2d> tl_fft;

Fft2d& fft_for(int n) {
  if (!tl_fft || tl_fft->n() != n) tl_fft = std::make_unique<Fft2d>(n);
  return *tl_fft;
}

}  // namespace

BeamGeometry beam_geometry(double z, const BeamParams& params) {
  const double zr = params.rayleigh_range();
  BeamGeometry g;
  g.w = params.w0 * std::sqrt(1.0 + (z / zr) * (z / zr));
  g.radius = (z == 0.0) ? std::numeric_limits<double>::infinity()
                        : z * (1.0 + (zr / z) * (zr / z));
  g.gouy_angle = std::atan2(z, zr);
  return g;
}

double ComplexField::power() const {
  const double px = grid.pitch();
  return a.squaredNorm() * px * px;
}

ModeLabel ModeLabel::oam(int l, int d) {
  if (l == 0 || std::abs(l) > d / 2)
    throw config_error("OAM index must lie in {-d/2..d/2} excluding 0");
  return {Basis::oam, l};
}

ModeLabel ModeLabel::angle(int j, int d) {
  if (j < 0 || j >= d) throw config_error("ANGLE index must lie in {0..d-1}");
  return {Basis::angle, j};
}

std::vector<int> oam_alphabet(int d) {
  if (d < 2 || d % 2 != 0) throw config_error("OAM alphabet needs even dimension");
  std::vector<int> out;
  for (int l = -d / 2; l <= d / 2; ++l)
    if (l != 0) out.push_back(l);
  return out;
}

int angle_mode_slot(int l, int d) {
  // g(l) = d/2 + (l-1)*heaviside(l) + l*heaviside(-l); bijection onto 0..d-1
  if (l > 0) return d / 2 + l - 1;
  return d / 2 + l;
}

Eigen::MatrixXcd angle_coefficients(int d) {
  const auto alphabet = oam_alphabet(d);
  Eigen::MatrixXcd c(d, d);
  const double norm = 1.0 / std::sqrt(static_cast<double>(d));
  for (int j = 0; j < d; ++j)
    for (int li = 0; li < d; ++li) {
      const double phase = 2.0 * kPi * j * angle_mode_slot(alphabet[li], d) / d;
      c(li, j) = norm * Complex(std::cos(phase), std::sin(phase));
    }
  return c;
}

ComplexField lg_mode(int l, double z, const BeamParams& params, const GridSpec& grid) {
  const BeamGeometry g = beam_geometry(z, params);
  if (g.w < 8.0 * grid.pitch())
    throw numeric_error("grid under-resolves the mode: fewer than 8 samples across w(z)");
  const int n = grid.n;
  const int al = std::abs(l);
  const double k = params.wavenumber();
  const double inv_w2 = 1.0 / (g.w * g.w);
  const double half_k_curv = 0.5 * k * g.curvature();
  const double gouy = (al + 1) * g.gouy_angle;

  ComplexField field;
  field.grid = grid;
  field.z = z;
  field.a.resize(n, n);
  for (int iy = 0; iy < n; ++iy) {
    const double y = grid.coord(iy);
    for (int ix = 0; ix < n; ++ix) {
      const double x = grid.coord(ix);
      const double r2 = x * x + y * y;
      const double rho = std::sqrt(2.0 * r2) / g.w;
      const double amp = std::pow(rho, al) * std::exp(-r2 * inv_w2);
      const double phi = std::atan2(y, x);
      const double phase = -l * phi - half_k_curv * r2 + gouy;
      field.a(iy, ix) = amp * Complex(std::cos(phase), std::sin(phase));
    }
  }
  const double p = field.power();
  if (p <= 0.0) throw numeric_error("lg_mode: zero-power field");
  field.a /= std::sqrt(p);
  return field;
}

ComplexField angle_mode(int j, double z, const BeamParams& params, const GridSpec& grid,
                        int d) {
  ModeLabel::angle(j, d);  // validates j
  const auto alphabet = oam_alphabet(d);
  const Eigen::MatrixXcd c = angle_coefficients(d);
  ComplexField field;
  field.grid = grid;
  field.z = z;
  field.a = FieldMatrix::Zero(grid.n, grid.n);
  for (int li = 0; li < d; ++li)
    field.a += c(li, j) * lg_mode(alphabet[li], z, params, grid).a;
  return field;
}

ComplexField propagate(const ComplexField& field, double dz, const BeamParams& params,
                       PropagationInfo* info) {
  const int n = field.grid.n;
  const double k = params.wavenumber();
  const double df = 1.0 / field.grid.window_m;  // frequency step, cycles/m
  Fft2d& fft = fft_for(n);
  Eigen::Map<FieldMatrix>(fft.data(), n, n) = field.a;
  fft.forward();

  long zeroed = 0;
  Complex* data = fft.data();
  for (int iy = 0; iy < n; ++iy) {
    const double fy = df * (iy < n / 2 ? iy : iy - n);
    const double ky = 2.0 * kPi * fy;
    for (int ix = 0; ix < n; ++ix) {
      const double fx = df * (ix < n / 2 ? ix : ix - n);
      const double kx = 2.0 * kPi * fx;
      const double kt2 = kx * kx + ky * ky;
      Complex& c = data[static_cast<std::size_t>(iy) * n + ix];
      if (kt2 >= k * k) {
        c = 0.0;  // evanescent component
        ++zeroed;
        continue;
      }
      const double kz = std::sqrt(k * k - kt2);
      // e^{-i kz dz}, with the plane-wave carrier e^{-i k dz} divided out
      const double phase = -(kz - k) * dz;
      c *= Complex(std::cos(phase), std::sin(phase));
    }
  }
  if (info) info->evanescent_zeroed = zeroed;

  fft.inverse();
  ComplexField out;
  out.grid = field.grid;
  out.z = field.z + dz;
  out.a = Eigen::Map<FieldMatrix>(fft.data(), n, n) / static_cast<double>(n) /
          static_cast<double>(n);
  return out;
}

ApertureResult apply_aperture(const ComplexField& field, double diameter) {
  if (diameter < 0.0) throw config_error("aperture diameter must be non-negative");
  ApertureResult result;
  result.field = field;
  const double before = field.power();
  const double r2max = 0.25 * diameter * diameter;
  const int n = field.grid.n;
  for (int iy = 0; iy < n; ++iy) {
    const double y = field.grid.coord(iy);
    for (int ix = 0; ix < n; ++ix) {
      const double x = field.grid.coord(ix);
      if (x * x + y * y > r2max) result.field.a(iy, ix) = 0.0;
    }
  }
  result.transmitted_fraction = before > 0.0 ? result.field.power() / before : 0.0;
  return result;
}

Complex overlap(const ComplexField& a, const ComplexField& b) {
  if (a.grid.n != b.grid.n || a.grid.window_m != b.grid.window_m)
    throw numeric_error("overlap: mismatched grids");
  const double px = a.grid.pitch();
  const Complex dot = (a.a.conjugate().cwiseProduct(b.a)).sum();
  return dot * px * px;
}

double fitted_beam_radius(const ComplexField& field, int l) {
  const int n = field.grid.n;
  double r2_sum = 0.0, w_sum = 0.0;
  for (int iy = 0; iy < n; ++iy) {
    const double y = field.grid.coord(iy);
    for (int ix = 0; ix < n; ++ix) {
      const double x = field.grid.coord(ix);
      const double inten = std::norm(field.a(iy, ix));
      r2_sum += (x * x + y * y) * inten;
      w_sum += inten;
    }
  }
  if (w_sum <= 0.0) throw numeric_error("fitted_beam_radius: zero power");
  return std::sqrt(2.0 * (r2_sum / w_sum) / (std::abs(l) + 1));
}

std::pair<double, double> centroid(const ComplexField& field) {
  const int n = field.grid.n;
  double xs = 0.0, ys = 0.0, w = 0.0;
  for (int iy = 0; iy < n; ++iy) {
    const double y = field.grid.coord(iy);
    for (int ix = 0; ix < n; ++ix) {
      const double inten = std::norm(field.a(iy, ix));
      xs += field.grid.coord(ix) * inten;
      ys += y * inten;
      w += inten;
    }
  }
  if (w <= 0.0) throw numeric_error("centroid: zero power");
  return {xs / w, ys / w};
}

void dump_field(const std::filesystem::path& path, const ComplexField& field,
                const std::string& sidecar_extra_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(field.a.data()),
            static_cast<std::streamsize>(sizeof(Complex) * field.a.size()));
  if (!out) throw io_error("failed writing " + path.string());

  std::ofstream side(path.string() + ".json");
  side << "{\n"
       << "  \"format\": \"interleaved float64 re,im; row-major; y rows, x cols\",\n"
       << "  \"grid_n\": " << field.grid.n << ",\n"
       << "  \"window_m\": " << format_double(field.grid.window_m) << ",\n"
       << "  \"z_m\": " << format_double(field.z);
  if (!sidecar_extra_json.empty()) side << ",\n" << sidecar_extra_json;
  side << "\n}\n";
}

}  // namespace turbcast::op
