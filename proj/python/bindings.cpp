#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "turbcast/forecaster.hpp"
#include "turbcast/optics.hpp"
#include "turbcast/qkd.hpp"
#include "turbcast/synth.hpp"
#include "turbcast/timeseries.hpp"
#include "turbcast/turbulence.hpp"

namespace py = pybind11;
using namespace turbcast;

namespace {

py::dict basis_dict(const qkd::BasisResult& basis) {
  py::dict d;
  d["crosstalk"] = basis.crosstalk;
  d["mean_raw"] = basis.mean_raw;
  d["row_sums"] = basis.row_sums;
  d["qder"] = basis.qder;
  d["worst_index"] = basis.worst_index;
  d["diagonal_means"] = basis.diagonal_means;
  return d;
}

qkd::ChannelParams make_params(double w0, double lambda, double path, double aperture,
                               int grid_n, double window, int d, int j_max, double d_eff,
                               int realizations, std::uint64_t seed, int threads) {
  qkd::ChannelParams p;
  p.beam = op::BeamParams{w0, lambda, path, aperture};
  p.grid = op::GridSpec{window, grid_n};
  p.d = d;
  p.j_max = j_max;
  p.d_eff = d_eff;
  p.n_realizations = realizations;
  p.seed = seed;
  p.threads = threads;
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cn2 forecasting and high-dimensional QKD turbulence simulation";

  // --- qkd scalars ---------------------------------------------------------
  m.def("shannon_h", &qkd::shannon_h, py::arg("e"), py::arg("d"));
  m.def("key_rate", &qkd::key_rate, py::arg("d"), py::arg("e"));
  m.def("security_threshold", &qkd::security_threshold, py::arg("d"));

  // --- turbulence ----------------------------------------------------------
  m.def("fried_r0", &turb::fried_r0, py::arg("cn2"), py::arg("lambda_m"),
        py::arg("path_m"));
  m.def("zernike_variances", &turb::zernike_variances, py::arg("j_max"),
        py::arg("d_eff"), py::arg("r0"));
  m.def(
      "zernike_eval",
      [](int j, double window, int n, double radius) {
        return turb::zernike_eval(j, op::GridSpec{window, n}, radius);
      },
      py::arg("j"), py::arg("window_m"), py::arg("grid_n"), py::arg("radius_m"));
  m.def(
      "sample_screen_coefficients",
      [](int j_max, double d_eff, double r0, std::uint64_t seed, bool independent) {
        const auto spectrum = turb::make_spectrum(j_max, d_eff, independent);
        Rng rng(seed);
        return Eigen::VectorXd(spectrum.sample(spectrum.amplitude_scale(r0), rng));
      },
      py::arg("j_max"), py::arg("d_eff"), py::arg("r0"), py::arg("seed"),
      py::arg("independent") = false);

  // --- optics ----------------------------------------------------------------
  m.def(
      "beam_geometry",
      [](double z, double w0, double lambda) {
        const auto g = op::beam_geometry(z, op::BeamParams{w0, lambda, 1.0, 1.0});
        return py::make_tuple(g.w, g.radius, g.gouy_angle);
      },
      py::arg("z"), py::arg("w0") = 0.08, py::arg("lambda_m") = 810e-9,
      "returns (w, R, gouy_angle)");
  m.def(
      "lg_mode",
      [](int l, double z, double w0, double lambda, double window, int n) {
        return Eigen::MatrixXcd(op::lg_mode(l, z, op::BeamParams{w0, lambda, 1, 1},
                                            op::GridSpec{window, n})
                                    .a);
      },
      py::arg("l"), py::arg("z") = 0.0, py::arg("w0") = 0.08,
      py::arg("lambda_m") = 810e-9, py::arg("window_m") = 1.2, py::arg("grid_n") = 256);
  m.def(
      "angle_mode",
      [](int j, double z, double w0, double lambda, double window, int n) {
        return Eigen::MatrixXcd(op::angle_mode(j, z, op::BeamParams{w0, lambda, 1, 1},
                                               op::GridSpec{window, n})
                                    .a);
      },
      py::arg("j"), py::arg("z") = 0.0, py::arg("w0") = 0.08,
      py::arg("lambda_m") = 810e-9, py::arg("window_m") = 1.2, py::arg("grid_n") = 256);
  m.def("oam_alphabet", &op::oam_alphabet, py::arg("d") = 8);
  m.def("angle_coefficients", &op::angle_coefficients, py::arg("d") = 8);

  // --- timeseries helpers -----------------------------------------------------
  m.def("periodic_time_features", &ts::periodic_time_features, py::arg("timestamp"));

  // --- channel simulation ------------------------------------------------------
  m.def(
      "simulate_channel",
      [](double cn2, double w0, double lambda, double path, double aperture, int grid_n,
         double window, int d, int j_max, double d_eff, int realizations,
         std::uint64_t seed, int threads) {
        const auto result = qkd::simulate_channel(
            make_params(w0, lambda, path, aperture, grid_n, window, d, j_max, d_eff,
                        realizations, seed, threads),
            cn2);
        py::dict out;
        out["cn2"] = result.cn2;
        out["oam"] = basis_dict(result.oam);
        out["angle"] = basis_dict(result.angle);
        return out;
      },
      py::arg("cn2"), py::arg("w0") = 0.08, py::arg("lambda_m") = 810e-9,
      py::arg("path_m") = 5400.0, py::arg("aperture_m") = 0.30, py::arg("grid_n") = 1024,
      py::arg("window_m") = 1.2, py::arg("d") = 8, py::arg("j_max") = 36,
      py::arg("d_eff") = 0.0, py::arg("realizations") = 100, py::arg("seed") = 1,
      py::arg("threads") = 0);
  m.def(
      "run_table",
      [](const std::vector<double>& levels, double w0, double lambda, double path,
         double aperture, int grid_n, double window, int d, int j_max, double d_eff,
         int realizations, std::uint64_t seed, int threads) {
        const auto report = qkd::run_table(
            make_params(w0, lambda, path, aperture, grid_n, window, d, j_max, d_eff,
                        realizations, seed, threads),
            levels);
        py::list rows;
        for (const auto& row : report.rows) {
          py::dict r;
          r["cn2"] = row.cn2;
          r["basis"] = row.basis;
          r["qder"] = row.qder;
          r["bits_per_photon"] = row.bits_per_photon;
          r["secure"] = row.secure;
          rows.append(r);
        }
        return rows;
      },
      py::arg("levels"), py::arg("w0") = 0.08, py::arg("lambda_m") = 810e-9,
      py::arg("path_m") = 5400.0, py::arg("aperture_m") = 0.30, py::arg("grid_n") = 1024,
      py::arg("window_m") = 1.2, py::arg("d") = 8, py::arg("j_max") = 36,
      py::arg("d_eff") = 0.0, py::arg("realizations") = 100, py::arg("seed") = 1,
      py::arg("threads") = 0);

  // --- forecaster ---------------------------------------------------------------
  py::class_<fc::GruForecaster>(m, "GruForecaster")
      .def(py::init<int, std::vector<int>, int, std::uint64_t>(), py::arg("input_features"),
           py::arg("hidden"), py::arg("n_out"), py::arg("seed"))
      .def("predict", &fc::GruForecaster::predict, py::arg("inputs"))
      .def_property_readonly("n_out", &fc::GruForecaster::n_out)
      .def_property_readonly("hidden_sizes", &fc::GruForecaster::hidden_sizes)
      .def("zero_parameters",
           [](fc::GruForecaster& self) { self.params().setZero(); })
      .def("parameter_count",
           [](const fc::GruForecaster& self) { return self.params().size(); })
      .def(
          "train_arrays",
          [](fc::GruForecaster& self, const std::vector<Eigen::MatrixXd>& x_train,
             const std::vector<Eigen::VectorXd>& y_train,
             const std::vector<Eigen::MatrixXd>& x_val,
             const std::vector<Eigen::VectorXd>& y_val, int max_epochs, double lr,
             int batch_size, std::uint64_t seed) {
            ts::NormalizedDataset train_set, val_set;
            train_set.inputs = x_train;
            train_set.targets = y_train;
            val_set.inputs = x_val;
            val_set.targets = y_val;
            fc::TrainConfig config;
            config.max_epochs = max_epochs;
            config.initial_lr = lr;
            config.batch_size = batch_size;
            config.seed = seed;
            const auto history = fc::train(self, train_set, val_set, config);
            py::list epochs;
            for (const auto& e : history.epochs)
              epochs.append(py::make_tuple(e.epoch, e.train_mse, e.val_mse, e.lr));
            return epochs;
          },
          py::arg("x_train"), py::arg("y_train"), py::arg("x_val"), py::arg("y_val"),
          py::arg("max_epochs") = 50, py::arg("lr") = 1e-3, py::arg("batch_size") = 32,
          py::arg("seed") = 1);

  // --- synthetic data --------------------------------------------------------------
  m.def(
      "synthetic_series",
      [](int days, std::uint64_t seed, double gap_fraction) {
        synth::SynthConfig config;
        config.days = days;
        config.seed = seed;
        config.gap_fraction = gap_fraction;
        const auto series = synth::generate(config);
        py::list scint;
        for (const auto& p : series.scint)
          scint.append(py::make_tuple(p.timestamp, p.cn2));
        return scint;
      },
      py::arg("days") = 2, py::arg("seed") = 1, py::arg("gap_fraction") = 0.0);
}
