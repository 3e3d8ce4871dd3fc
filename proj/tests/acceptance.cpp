// Acceptance suite: one pass/fail line per criterion.
//
// Usage: acceptance [--cli <path-to-turbcast>] [--scratch <dir>] [--only N]

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "turbcast/common.hpp"
#include "turbcast/forecaster.hpp"
#include "turbcast/importance.hpp"
#include "turbcast/optics.hpp"
#include "turbcast/qkd.hpp"
#include "turbcast/synth.hpp"
#include "turbcast/timeseries.hpp"
#include "turbcast/turbulence.hpp"

namespace fs = std::filesystem;
using namespace turbcast;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Checker {
  bool ok = true;
  std::string detail;

  void expect(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// --- criterion 1: key-rate fidelity -----------------------------------------

bool criterion_key_rate(std::string& detail) {
  Checker c;
  const struct {
    double qder, printed;
  } rows[] = {{0.0818, 1.72}, {0.0233, 2.54}, {0.178, 0.64}, {0.0540, 2.09},
              {0.2177, 0.266}};
  for (const auto& row : rows) {
    const double bp = std::max(0.0, qkd::key_rate(8, row.qder));
    c.expect(std::fabs(bp - row.printed) <= 0.01,
             "R(8," + fmt(row.qder) + ")=" + fmt(bp) + " vs " + fmt(row.printed));
  }
  c.expect(std::max(0.0, qkd::key_rate(8, 0.77)) == 0.0, "clamp at negative rate");
  c.expect(qkd::key_rate(8, 0.0) == 3.0, "R(8,0) must be exactly 3");
  const double e8 = qkd::security_threshold(8);
  c.expect(std::fabs(e8 - 0.247) <= 0.002, "threshold(8)=" + fmt(e8));
  detail = c.detail;
  return c.ok;
}

// --- criterion 2: QKD simulation band ---------------------------------------

bool criterion_qkd_band(std::string& detail) {
  Checker c;
  qkd::ChannelParams params;  // defaults: w0 8 cm, 810 nm, 5.4 km, D 30 cm, 1024^2
  params.n_realizations = 100;
  params.seed = 1;
  const std::vector<double> levels{1e-16, 1e-15, 1e-14};

  qkd::ChannelSimulator sim(params);
  std::vector<qkd::ChannelResult> results;
  for (std::size_t i = 0; i < levels.size(); ++i)
    results.push_back(sim.run(levels[i], static_cast<int>(i)));

  for (std::size_t i = 1; i < results.size(); ++i) {
    c.expect(results[i].oam.qder > results[i - 1].oam.qder,
             "OAM QDER not increasing at level " + fmt(levels[i]));
    c.expect(results[i].angle.qder > results[i - 1].angle.qder,
             "ANGLE QDER not increasing at level " + fmt(levels[i]));
  }
  for (std::size_t i = 0; i < results.size(); ++i)
    c.expect(results[i].angle.qder < results[i].oam.qder,
             "ANGLE not below OAM at " + fmt(levels[i]));

  const double oam0 = results[0].oam.qder, ang0 = results[0].angle.qder;
  c.expect(oam0 >= 0.04 && oam0 <= 0.14,
           "OAM QDER at 1e-16 = " + fmt(100 * oam0) + "% outside [4,14]%");
  c.expect(ang0 >= 0.01 && ang0 <= 0.06,
           "ANGLE QDER at 1e-16 = " + fmt(100 * ang0) + "% outside [1,6]%");

  for (std::size_t i = 1; i < results.size(); ++i) {
    c.expect(std::max(0.0, qkd::key_rate(8, results[i].oam.qder)) == 0.0,
             "OAM b/p nonzero at " + fmt(levels[i]));
    c.expect(std::max(0.0, qkd::key_rate(8, results[i].angle.qder)) == 0.0,
             "ANGLE b/p nonzero at " + fmt(levels[i]));
  }
  detail = "QDER(1e-16): OAM " + fmt(100 * oam0) + "%, ANGLE " + fmt(100 * ang0) +
           "%; QDER(1e-15): OAM " + fmt(100 * results[1].oam.qder) + "%, ANGLE " +
           fmt(100 * results[1].angle.qder) + "%" +
           (c.detail.empty() ? "" : "; " + c.detail);
  return c.ok;
}

// --- criterion 3: optics invariants ------------------------------------------

bool criterion_optics(std::string& detail) {
  Checker c;
  const op::BeamParams beam;
  const op::GridSpec grid{1.2, 1024};

  std::vector<op::ComplexField> oam, angle;
  for (int l : op::oam_alphabet(8)) oam.push_back(op::lg_mode(l, 0.0, beam, grid));
  for (int j = 0; j < 8; ++j) angle.push_back(op::angle_mode(j, 0.0, beam, grid));

  double worst_off = 0.0, worst_diag = 0.0;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      const double o = std::abs(op::overlap(oam[i], oam[j]));
      const double a = std::abs(op::overlap(angle[i], angle[j]));
      if (i == j) {
        worst_diag = std::max({worst_diag, std::fabs(o - 1.0), std::fabs(a - 1.0)});
      } else {
        worst_off = std::max({worst_off, o, a});
      }
    }
  c.expect(worst_off <= 1e-6, "off-diagonal overlap " + fmt(worst_off));
  c.expect(worst_diag <= 1e-6, "diagonal deviation " + fmt(worst_diag));

  double worst_mub = 0.0;
  for (const auto& l_mode : oam)
    for (const auto& a_mode : angle)
      worst_mub = std::max(worst_mub,
                           std::fabs(std::norm(op::overlap(l_mode, a_mode)) - 0.125));
  c.expect(worst_mub <= 1e-6, "MUB deviation " + fmt(worst_mub));

  const auto propagated = op::propagate(oam[4], beam.path_length, beam);  // l = +1
  const double w_fit = op::fitted_beam_radius(propagated, 1);
  const double w_ref = op::beam_geometry(beam.path_length, beam).w;
  c.expect(std::fabs(w_fit / w_ref - 1.0) <= 0.005,
           "w(L) fit " + fmt(w_fit) + " vs " + fmt(w_ref));
  c.expect(std::fabs(w_ref - 0.0819) < 2e-4, "analytic w(L) sanity");
  const double drift = std::fabs(propagated.power() - oam[4].power());
  c.expect(drift < 1e-10, "power drift " + fmt(drift));

  detail = "max off-diag " + fmt(worst_off) + ", MUB dev " + fmt(worst_mub) +
           ", w(L) " + fmt(w_fit) + (c.detail.empty() ? "" : "; " + c.detail);
  return c.ok;
}

// --- criterion 4: turbulence statistics --------------------------------------

bool criterion_turbulence(std::string& detail) {
  Checker c;
  // empirical coefficient variances over 10,000 draws, modes 2..10
  const auto spectrum = turb::make_spectrum(10, 0.30);
  const double r0 = turb::fried_r0(1e-16, 810e-9, 5400);
  const double scale = spectrum.amplitude_scale(r0);
  const auto expected = turb::zernike_variances(10, 0.30, r0);
  Rng rng(20240);
  VectorXd sum_sq = VectorXd::Zero(9);
  for (int i = 0; i < 10000; ++i) {
    const VectorXd a = spectrum.sample(scale, rng);
    sum_sq += a.cwiseProduct(a);
  }
  for (int j = 0; j < 9; ++j) {
    const double ratio = (sum_sq[j] / 10000.0) / expected[j];
    c.expect(std::fabs(ratio - 1.0) <= 0.05,
             "variance of mode " + std::to_string(j + 2) + " off by " + fmt(ratio));
  }

  // tilt variance against the Noll residual-difference oracle
  const double tilt_oracle = (1.0299 - 0.582);  // Delta_1 - Delta_2, tabulated
  const auto var_unit = turb::zernike_variances(10, 1.0, 1.0);
  c.expect(std::fabs(var_unit[0] / tilt_oracle - 1.0) <= 0.01,
           "tilt variance " + fmt(var_unit[0]) + " vs oracle " + fmt(tilt_oracle));

  // exact power-law scaling of r0
  const double base = turb::fried_r0(2e-16, 810e-9, 5400);
  bool scaling_ok = true;
  for (double s : {3.0, 10.0, 250.0}) {
    const double want = base * std::pow(s, -3.0 / 5.0);
    const double got = turb::fried_r0(s * 2e-16, 810e-9, 5400);
    if (std::fabs(got / want - 1.0) > 1e-12) scaling_ok = false;
  }
  c.expect(scaling_ok, "r0 power law not exact");

  detail = "tilt " + fmt(var_unit[0]) + " vs 0.4479" +
           (c.detail.empty() ? "" : "; " + c.detail);
  return c.ok;
}

// --- criterion 5: forecaster correctness -------------------------------------

bool criterion_forecaster(std::string& detail) {
  Checker c;

  // (a) BPTT gradients vs central differences: 10 steps, hidden 4, 3 seeds
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    fc::GruForecaster net(3, {4}, 5, seed);
    Rng rng(seed + 100);
    MatrixXd x(10, 3);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform(-1, 1);
    VectorXd y(5);
    for (int i = 0; i < 5; ++i) y[i] = rng.uniform(-1, 1);

    const VectorXd analytic = fc::backward(net, x, y);
    VectorXd& theta = net.params();
    std::vector<const MatrixXd*> xs{&x};
    std::vector<const VectorXd*> ys{&y};
    VectorXd scratch;
    double worst = 0.0;
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double save = theta[i];
      theta[i] = save + h;
      const double up = net.loss_and_gradient(xs, ys, scratch);
      theta[i] = save - h;
      const double down = net.loss_and_gradient(xs, ys, scratch);
      theta[i] = save;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({1e-6, std::fabs(numeric), std::fabs(analytic[i])});
      worst = std::max(worst, std::fabs(numeric - analytic[i]) / denom);
    }
    c.expect(worst < 1e-4, "gradcheck seed " + std::to_string(seed) + ": " + fmt(worst));
  }

  // (b) zero-weight GRU decay, exact
  {
    fc::GruForecaster net(3, {4}, 2, 1);
    net.params().setZero();
    const fc::GruForecaster& cnet = net;
    Rng rng(8);
    VectorXd h0(4), x(3);
    for (int i = 0; i < 4; ++i) h0[i] = rng.uniform(-1, 1);
    VectorXd h = h0;
    bool exact = true;
    for (int t = 1; t <= 30; ++t) {
      for (int i = 0; i < 3; ++i) x[i] = rng.uniform(-1, 1);
      h = fc::gru_cell_forward(x, h, cnet.layer(0));
      if ((h - std::pow(0.5, t) * h0).cwiseAbs().maxCoeff() != 0.0) exact = false;
    }
    c.expect(exact, "zero-weight decay not exact");
  }

  // (c) synthetic diurnal pipeline: GRU beats persistence by >= 20%
  double gru_rmse = 0, persistence_rmse = 0;
  {
    synth::SynthConfig scfg;
    scfg.days = 14;
    scfg.seed = 11;
    const auto series_raw = synth::generate(scfg);
    auto series = ts::align_series(series_raw.weather, series_raw.scint);
    series = ts::moving_average_log_cn2(series);

    const auto features = ts::basic_features();
    ts::WindowOptions wopts;
    wopts.stride_min = 30;
    const auto windows = ts::make_windows(series, features, wopts);
    const auto split = ts::split_dataset(windows.examples, ts::SplitOptions{}, wopts);
    const auto stats = ts::compute_stats(split.train, features);
    const auto train_set = ts::prepare(split.train, stats);
    const auto val_set = ts::prepare(split.validation, stats);

    fc::GruForecaster net(6, {24}, wopts.n_out(), 5);
    fc::TrainConfig tc;
    tc.max_epochs = 45;
    tc.initial_lr = 2e-3;
    tc.seed = 5;
    fc::train(net, train_set, val_set, tc);

    gru_rmse = fc::evaluate(net, val_set).mean_rmse;
    persistence_rmse =
        fc::evaluate_persistence(val_set, features.log10_cn2_column()).mean_rmse;
    c.expect(gru_rmse <= 0.8 * persistence_rmse,
             "GRU " + fmt(gru_rmse) + " vs persistence " + fmt(persistence_rmse));
  }

  // plateau schedule boundary: fires exactly on the 15th stalled epoch
  {
    fc::PlateauScheduler s(1e-4, 15, 0.1, 1e-5);
    s.observe(1.0);
    bool early = false;
    for (int i = 0; i < 14; ++i)
      if (s.observe(1.0) != 1e-4) early = true;
    c.expect(!early, "schedule fired before 15 stalled epochs");
    c.expect(std::fabs(s.observe(1.0) - 1e-5) < 1e-18, "schedule did not fire at 15");
  }

  detail = "GRU val RMSE " + fmt(gru_rmse) + " vs persistence " +
           fmt(persistence_rmse) + (c.detail.empty() ? "" : "; " + c.detail);
  return c.ok;
}

// --- criterion 6: pipeline arithmetic ----------------------------------------

bool criterion_pipeline(std::string& detail) {
  Checker c;
  ts::WindowOptions w15;
  c.expect(w15.n_out() == 24, "N_out(6h,15min) != 24");
  ts::WindowOptions w1;
  w1.out_res_min = 1;
  c.expect(w1.n_out() == 360, "N_out(6h,1min) != 360");

  // windows carry exactly 720 input steps
  ts::MinuteSeries series;
  series.start = 1688169600;
  series.records.resize(1100);
  series.gap.assign(1100, 0);
  for (int i = 0; i < 1100; ++i) {
    auto& r = series.records[i];
    r.timestamp = series.minute(i);
    r.temperature_c = 20.0 + 0.01 * i;
    r.solar_radiation_kj_m2 = 10.0 + 0.1 * i;
    r.relative_humidity_pct = 50.0 + 0.001 * i;
    r.log10_cn2 = -15.0 + 1e-3 * std::sin(0.01 * i);
  }
  const auto windows = ts::make_windows(series, ts::basic_features());
  c.expect(!windows.examples.empty(), "no windows produced");
  for (const auto& ex : windows.examples)
    if (ex.inputs.rows() != 720) c.expect(false, "input step count != 720");

  // normalization round trip
  ts::NormalizationStats stats;
  stats.feature_names = {"a", "log10_cn2"};
  stats.min.resize(2);
  stats.max.resize(2);
  stats.min << -3.0, -16.2;
  stats.max << 7.0, -13.9;
  Rng rng(2);
  MatrixXd x(200, 2);
  for (int i = 0; i < 200; ++i) {
    x(i, 0) = rng.uniform(-10, 10);
    x(i, 1) = rng.uniform(-17, -13);
  }
  const double err =
      (ts::denormalize(ts::normalize(x, stats), stats) - x).cwiseAbs().maxCoeff();
  c.expect(err < 1e-12, "normalization round trip error " + fmt(err));

  detail = c.detail;
  return c.ok;
}

// --- criterion 7: permutation feature importance ------------------------------

bool criterion_pfi(std::string& detail) {
  Checker c;
  const int t = 8, f = 4, n_out = 3, k = 2;

  // model that reads exactly feature k at the last step (ReLU kept linear)
  fc::MlpBaseline net(f, t, {1}, n_out, 1);
  net.params().setZero();
  net.weight(0)(0, (t - 1) * f + k) = 1.0;
  net.bias(0)[0] = 10.0;
  net.weight(1).setOnes();
  net.bias(1).setConstant(-10.0);

  ts::NormalizedDataset ds;
  Rng rng(41);
  for (int e = 0; e < 200; ++e) {
    MatrixXd x(t, f);
    for (int i = 0; i < t; ++i)
      for (int j = 0; j < f; ++j) x(i, j) = rng.uniform();
    VectorXd y(n_out);
    for (int j = 0; j < n_out; ++j) y[j] = x(t - 1, k) + 0.02 * rng.gaussian();
    ds.inputs.push_back(x);
    ds.targets.push_back(y);
    ds.start_timestamps.push_back(e);
  }

  std::vector<imp::FeatureGroup> groups;
  for (int j = 0; j < f; ++j) groups.push_back({"f" + std::to_string(j), {j}});
  const auto report = imp::feature_importance(net, ds, groups, 3, 1000, 9);

  for (int j = 0; j < f; ++j) {
    if (j == k) {
      c.expect(report.entries[j].mean > 2.0,
               "used feature importance " + fmt(report.entries[j].mean) + " <= 2");
    } else {
      c.expect(report.entries[j].mean == 1.0,
               "ignored feature " + std::to_string(j) + " importance " +
                   fmt(report.entries[j].mean) + " != 1.0 exactly");
      c.expect(report.entries[j].mean >= 0.95 && report.entries[j].mean <= 1.05,
               "ignored feature outside [0.95, 1.05]");
    }
    c.expect(report.entries[j].repeats == 3, "repeat count != 3");
  }
  detail = "used feature I = " + fmt(report.entries[k].mean) +
           (c.detail.empty() ? "" : "; " + c.detail);
  return c.ok;
}

// --- criterion 8: determinism of the CLI -------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw io_error("missing output file: " + p.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

bool criterion_determinism(const std::string& cli, const fs::path& scratch,
                           std::string& detail) {
  Checker c;
  if (cli.empty()) {
    detail = "no --cli given";
    return false;
  }
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  // shared config: small but real workloads
  const fs::path cfg_path = scratch / "run.cfg";
  {
    std::ofstream cfg(cfg_path);
    cfg << "seed=7\n"
        << "qkd.grid_n=256\n"
        << "qkd.realizations=6\n"
        << "qkd.levels=1e-16\n"
        << "synth.days=4\n"
        << "data.stride_min=120\n"
        << "train.hidden=8\n"
        << "train.max_epochs=2\n"
        << "train.batch_size=16\n";
  }
  const std::string base = "--config " + cfg_path.string();

  // qkd twice, different worker counts
  const std::vector<std::pair<std::string, int>> qkd_runs{{"q1", 1}, {"q2", 2}, {"q3", 1}};
  for (const auto& [dir, threads] : qkd_runs) {
    const int rc = run_cli(cli, base + " --out-dir " + (scratch / dir).string() +
                                    " --threads " + std::to_string(threads) + " qkd");
    c.expect(rc == 0, "qkd run failed in " + dir);
  }
  for (const char* name :
       {"qkd_report.csv", "crosstalk_1e-16_OAM.csv", "crosstalk_1e-16_ANGLE.csv",
        "crosstalk_1e-16_OAM.json", "worst_screen_1e-16_ANGLE.csv"}) {
    const std::string a = slurp(scratch / "q1" / name);
    c.expect(a == slurp(scratch / "q2" / name),
             std::string(name) + " differs across worker counts");
    c.expect(a == slurp(scratch / "q3" / name),
             std::string(name) + " differs across runs");
  }

  // train twice on identical synthetic data
  c.expect(run_cli(cli, base + " --out-dir " + (scratch / "data").string() + " synth") == 0,
           "synth failed");
  c.expect(run_cli(cli, base + " --out-dir " + (scratch / "data").string() +
                            " ingest --weather " + (scratch / "data/weather.csv").string() +
                            " --scint " + (scratch / "data/scint.csv").string()) == 0,
           "ingest failed");
  for (const char* dir : {"t1", "t2"}) {
    const int rc = run_cli(cli, base + " --out-dir " + (scratch / dir).string() +
                                    " train --dataset " +
                                    (scratch / "data/aligned.csv").string());
    c.expect(rc == 0, std::string("train run failed in ") + dir);
  }
  for (const char* name : {"model.ckpt", "history.csv"}) {
    c.expect(slurp(scratch / "t1" / name) == slurp(scratch / "t2" / name),
             std::string(name) + " differs across runs");
  }

  detail = c.detail;
  return c.ok;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli, scratch = "acceptance_scratch";
  int only = 0;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    if (key == "--cli") cli = argv[i + 1];
    else if (key == "--scratch") scratch = argv[i + 1];
    else if (key == "--only") only = std::atoi(argv[i + 1]);
  }

  struct Criterion {
    int number;
    const char* name;
    std::function<bool(std::string&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "key-rate fidelity", criterion_key_rate},
      {2, "QKD simulation band", criterion_qkd_band},
      {3, "optics invariants", criterion_optics},
      {4, "turbulence statistics", criterion_turbulence},
      {5, "forecaster correctness", criterion_forecaster},
      {6, "pipeline arithmetic", criterion_pipeline},
      {7, "feature-importance sanity", criterion_pfi},
      {8, "determinism",
       [&](std::string& d) { return criterion_determinism(cli, scratch, d); }},
  };

  bool all_ok = true;
  for (const auto& criterion : criteria) {
    if (only != 0 && criterion.number != only) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion.number << " ("
              << criterion.name << ") [" << fmt(secs) << "s]"
              << (detail.empty() ? "" : " - " + detail) << '\n';
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
