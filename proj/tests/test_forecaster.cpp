#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "turbcast/common.hpp"
#include "turbcast/forecaster.hpp"

using namespace turbcast;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_inputs(int t, int f, Rng& rng) {
  MatrixXd x(t, f);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < f; ++j) x(i, j) = rng.uniform(-1, 1);
  return x;
}

VectorXd random_vector(int n, Rng& rng) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1, 1);
  return v;
}

// central finite differences against the analytic gradient
void check_gradients(fc::ForecastNet& net, const MatrixXd& inputs, const VectorXd& target,
                     double h = 1e-5) {
  const VectorXd analytic = fc::backward(net, inputs, target);
  VectorXd& theta = net.params();
  std::vector<const MatrixXd*> xs{&inputs};
  std::vector<const VectorXd*> ys{&target};
  VectorXd scratch;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double save = theta[i];
    theta[i] = save + h;
    const double up = net.loss_and_gradient(xs, ys, scratch);
    theta[i] = save - h;
    const double down = net.loss_and_gradient(xs, ys, scratch);
    theta[i] = save;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({1e-6, std::fabs(numeric), std::fabs(analytic[i])});
    worst = std::max(worst, std::fabs(numeric - analytic[i]) / scale);
  }
  CHECK(worst < 1e-4);
}

fc::GruLayerConstView zero_layer_view(const fc::GruForecaster& net) { return net.layer(0); }

}  // namespace

TEST_CASE("gru cell with zero parameters halves the hidden state") {
  fc::GruForecaster net(3, {4}, 2, 1);
  net.params().setZero();
  const auto layer = zero_layer_view(net);
  Rng rng(5);
  const VectorXd h0 = random_vector(4, rng);
  const VectorXd x = random_vector(3, rng);

  SUBCASE("single step: z = sigmoid(0) = 1/2, candidate 0") {
    const VectorXd h1 = fc::gru_cell_forward(x, h0, layer);
    CHECK((h1 - 0.5 * h0).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("t steps decay by exactly 0.5^t") {
    VectorXd h = h0;
    for (int t = 1; t <= 20; ++t) {
      h = fc::gru_cell_forward(random_vector(3, rng), h, layer);
      CHECK((h - std::pow(0.5, t) * h0).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("output independent of x when input weights are zero") {
    const VectorXd a = fc::gru_cell_forward(random_vector(3, rng), h0, layer);
    const VectorXd b = fc::gru_cell_forward(random_vector(3, rng), h0, layer);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("non-finite input is rejected") {
    VectorXd bad = x;
    bad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(fc::gru_cell_forward(bad, h0, layer), numeric_error);
  }
}

TEST_CASE("model forward") {
  Rng rng(17);

  SUBCASE("zero-parameter model predicts the dense bias") {
    fc::GruForecaster net(3, {4, 3}, 5, 1);
    net.params().setZero();
    net.head_b() << 0.1, -0.2, 0.3, -0.4, 0.5;
    const VectorXd pred = net.predict(random_inputs(12, 3, rng));
    CHECK((pred - net.head_b()).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("permuting feature columns with matching weight permutation is a no-op") {
    fc::GruForecaster net(4, {5}, 3, 7);
    const MatrixXd x = random_inputs(15, 4, rng);
    const VectorXd base = net.predict(x);

    const std::vector<int> perm{2, 0, 3, 1};
    fc::GruForecaster permuted = net;
    auto src = net.layer(0);
    auto dst = permuted.layer(0);
    for (int j = 0; j < 4; ++j) {
      dst.Wz.col(j) = src.Wz.col(perm[j]);
      dst.Wr.col(j) = src.Wr.col(perm[j]);
      dst.Wn.col(j) = src.Wn.col(perm[j]);
    }
    MatrixXd xp(x.rows(), x.cols());
    for (int j = 0; j < 4; ++j) xp.col(j) = x.col(perm[j]);
    CHECK((permuted.predict(xp) - base).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("doubling a head row doubles only that output") {
    fc::GruForecaster net(3, {6}, 4, 11);
    net.head_b().setZero();
    const MatrixXd x = random_inputs(10, 3, rng);
    const VectorXd base = net.predict(x);
    net.head_w().row(2) *= 2.0;
    const VectorXd scaled = net.predict(x);
    CHECK(scaled[2] == doctest::Approx(2.0 * base[2]));
    CHECK(scaled[0] == doctest::Approx(base[0]));
    CHECK(scaled[1] == doctest::Approx(base[1]));
    CHECK(scaled[3] == doctest::Approx(base[3]));
  }

  SUBCASE("shape mismatch raises") {
    fc::GruForecaster net(3, {4}, 2, 1);
    CHECK_THROWS_AS(net.predict(random_inputs(10, 5, rng)), numeric_error);
  }
}

TEST_CASE("mse loss convention") {
  SUBCASE("perfect prediction") {
    std::vector<VectorXd> p{VectorXd::Ones(24)}, t{VectorXd::Ones(24)};
    CHECK(fc::mse_loss(p, t) == 0.0);
  }
  SUBCASE("all-ones error over 24 outputs costs 24 per example") {
    std::vector<VectorXd> p{VectorXd::Ones(24)}, t{VectorXd::Zero(24)};
    CHECK(fc::mse_loss(p, t) == doctest::Approx(24.0));
  }
  SUBCASE("two examples average their per-example losses") {
    std::vector<VectorXd> p{VectorXd::Ones(4), VectorXd::Zero(4)};
    std::vector<VectorXd> t{VectorXd::Zero(4), VectorXd::Zero(4)};
    // losses 4 and 0
    CHECK(fc::mse_loss(p, t) == doctest::Approx(2.0));
  }
}

TEST_CASE("BPTT gradients match central finite differences") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Rng rng(seed * 99 + 5);
    SUBCASE(("single layer, seed " + std::to_string(seed)).c_str()) {
      fc::GruForecaster net(3, {4}, 5, seed);
      check_gradients(net, random_inputs(10, 3, rng), random_vector(5, rng));
    }
    SUBCASE(("stacked layers, seed " + std::to_string(seed)).c_str()) {
      fc::GruForecaster net(3, {4, 3}, 2, seed);
      check_gradients(net, random_inputs(10, 3, rng), random_vector(2, rng));
    }
  }
}

TEST_CASE("gradient structure") {
  Rng rng(23);

  SUBCASE("dense-bias gradient is the batch mean of 2(pred - true)") {
    fc::GruForecaster net(3, {4}, 5, 9);
    const MatrixXd x1 = random_inputs(8, 3, rng), x2 = random_inputs(8, 3, rng);
    const VectorXd y1 = random_vector(5, rng), y2 = random_vector(5, rng);
    VectorXd grad;
    std::vector<const MatrixXd*> xs{&x1, &x2};
    std::vector<const VectorXd*> ys{&y1, &y2};
    net.loss_and_gradient(xs, ys, grad);
    const VectorXd expect =
        ((net.predict(x1) - y1) + (net.predict(x2) - y2));  // 2/B with B=2 -> sum
    CHECK((grad.tail(5) - expect).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("all gradients vanish at the loss minimum") {
    fc::GruForecaster net(3, {4}, 5, 9);
    net.params().setZero();
    net.head_b() << 1, 2, 3, 4, 5;
    const MatrixXd x = random_inputs(8, 3, rng);
    const VectorXd target = net.head_b();
    const VectorXd grad = fc::backward(net, x, target);
    CHECK(grad.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("adam optimizer") {
  SUBCASE("first step moves by about -lr * sign(g)") {
    VectorXd theta = VectorXd::Zero(4);
    VectorXd g(4);
    g << 0.3, -2.0, 1e-3, -4e4;
    fc::AdamState state;
    fc::adam_step(theta, g, state, 0.01);
    for (int i = 0; i < 4; ++i)
      CHECK(theta[i] == doctest::Approx(-0.01 * (g[i] > 0 ? 1.0 : -1.0)).epsilon(1e-4));
  }

  SUBCASE("zero gradient never moves the parameters") {
    VectorXd theta(3);
    theta << 1.0, -2.0, 3.0;
    const VectorXd snapshot = theta;
    fc::AdamState state;
    for (int i = 0; i < 50; ++i) fc::adam_step(theta, VectorXd::Zero(3), state, 0.1);
    CHECK((theta - snapshot).cwiseAbs().maxCoeff() == 0.0);
  }
}

namespace {

// tiny sinusoid dataset: inputs carry the recent waveform, targets continue it
ts::NormalizedDataset sinusoid_dataset(int n_examples, int t_len, int n_out,
                                       std::uint64_t seed) {
  ts::NormalizedDataset ds;
  Rng rng(seed);
  for (int e = 0; e < n_examples; ++e) {
    const double phase = rng.uniform(0, 2 * 3.14159265358979);
    MatrixXd x(t_len, 3);
    for (int t = 0; t < t_len; ++t) {
      const double arg = phase + 0.1 * t;
      x(t, 0) = 0.5 + 0.4 * std::sin(arg);
      x(t, 1) = 0.5 + 0.4 * std::cos(arg);
      x(t, 2) = 0.5;
    }
    VectorXd y(n_out);
    for (int k = 0; k < n_out; ++k)
      y[k] = 0.5 + 0.4 * std::sin(phase + 0.1 * (t_len + 1 + k));
    ds.inputs.push_back(x);
    ds.targets.push_back(y);
    ds.start_timestamps.push_back(e);
  }
  return ds;
}

}  // namespace

TEST_CASE("training") {
  SUBCASE("pure sinusoid converges below 1e-3 within 200 epochs") {
    auto train_set = sinusoid_dataset(160, 48, 8, 4);
    auto val_set = sinusoid_dataset(40, 48, 8, 5);
    fc::GruForecaster net(3, {16}, 8, 2);
    fc::TrainConfig config;
    config.max_epochs = 200;
    config.initial_lr = 3e-3;
    config.seed = 7;
    const auto history = fc::train(net, train_set, val_set, config);
    CHECK(history.epochs.back().train_mse < 1e-3);
    // learning rate never increases
    for (std::size_t i = 1; i < history.epochs.size(); ++i)
      CHECK(history.epochs[i].lr <= history.epochs[i - 1].lr);
    // best-validation parameters were retained
    const auto eval = fc::evaluate(net, val_set);
    CHECK(eval.mean_rmse < 0.05);
  }

  SUBCASE("identical runs produce bit-identical parameter trajectories") {
    auto train_set = sinusoid_dataset(48, 16, 4, 8);
    auto val_set = sinusoid_dataset(16, 16, 4, 9);
    fc::TrainConfig config;
    config.max_epochs = 5;
    config.seed = 3;
    fc::GruForecaster a(3, {6}, 4, 1), b(3, {6}, 4, 1);
    const auto ha = fc::train(a, train_set, val_set, config);
    const auto hb = fc::train(b, train_set, val_set, config);
    CHECK(a.params() == b.params());
    REQUIRE(ha.epochs.size() == hb.epochs.size());
    for (std::size_t i = 0; i < ha.epochs.size(); ++i) {
      CHECK(ha.epochs[i].train_mse == hb.epochs[i].train_mse);
      CHECK(ha.epochs[i].val_mse == hb.epochs[i].val_mse);
    }
  }

  SUBCASE("empty training split raises") {
    ts::NormalizedDataset empty;
    auto val = sinusoid_dataset(4, 8, 2, 1);
    fc::GruForecaster net(3, {4}, 2, 1);
    CHECK_THROWS_AS(fc::train(net, empty, val, fc::TrainConfig{}), config_error);
  }
}

TEST_CASE("plateau schedule") {
  SUBCASE("fires exactly after 15 stalled epochs") {
    fc::PlateauScheduler s(1e-4, 15, 0.1, 1e-5);
    s.observe(1.0);  // establishes the best
    for (int i = 0; i < 14; ++i) CHECK(s.observe(1.0) == doctest::Approx(1e-4));
    CHECK(s.observe(1.0) == doctest::Approx(1e-5));  // 15th stalled epoch
  }

  SUBCASE("a significant improvement resets the counter") {
    fc::PlateauScheduler s(1e-4, 15, 0.1, 1e-5);
    s.observe(1.0);
    for (int i = 0; i < 14; ++i) s.observe(1.0);
    s.observe(0.5);  // improvement
    for (int i = 0; i < 14; ++i) CHECK(s.observe(0.5) == doctest::Approx(1e-4));
    CHECK(s.observe(0.5) == doctest::Approx(1e-5));
  }

  SUBCASE("sub-threshold improvements still count as stalls") {
    fc::PlateauScheduler s(1e-2, 3, 0.1, 1e-5);
    s.observe(1.0);
    s.observe(1.0 - 5e-6);
    s.observe(1.0 - 8e-6);
    CHECK(s.observe(1.0 - 9e-6) == doctest::Approx(1e-3));
  }
}

TEST_CASE("evaluation metrics") {
  // zero-weight net predicts its bias; craft targets around it
  fc::GruForecaster net(3, {4}, 6, 1);
  net.params().setZero();
  net.head_b() << 0.3, 0.4, 0.5, 0.6, 0.7, 0.8;
  ts::NormalizedDataset data;
  Rng rng(2);
  const VectorXd bias = net.head_b();

  SUBCASE("perfect prediction: RMSE 0, delta 1") {
    for (int i = 0; i < 5; ++i) {
      data.inputs.push_back(random_inputs(10, 3, rng));
      data.targets.push_back(bias);
    }
    const auto report = fc::evaluate(net, data);
    CHECK(report.mean_rmse == 0.0);
    CHECK(report.delta == 1.0);
  }

  SUBCASE("constant offset 0.1 gives RMSE 0.1 and delta 0.9") {
    for (int i = 0; i < 5; ++i) {
      data.inputs.push_back(random_inputs(10, 3, rng));
      data.targets.push_back(bias.array() + 0.1);
    }
    const auto report = fc::evaluate(net, data);
    CHECK(report.mean_rmse == doctest::Approx(0.1));
    CHECK(report.delta == doctest::Approx(0.9));
    for (int k = 0; k < report.per_step_rmse.size(); ++k)
      CHECK(report.per_step_rmse[k] == doctest::Approx(0.1));
  }
}

TEST_CASE("mlp baseline") {
  Rng rng(31);

  SUBCASE("zero weights produce the output bias") {
    fc::MlpBaseline net(3, 10, {8, 8}, 4, 1);
    net.params().setZero();
    net.bias(2) << 1, 2, 3, 4;
    const VectorXd pred = net.predict(random_inputs(10, 3, rng));
    CHECK((pred - net.bias(2)).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("gradients match finite differences") {
    fc::MlpBaseline net(3, 6, {8, 8}, 3, 21);
    check_gradients(net, random_inputs(6, 3, rng), random_vector(3, rng));
  }

  SUBCASE("factory applies the canonical 2x1000 shape") {
    const auto net = fc::build_mlp_baseline(6, 720, 24, 1);
    CHECK(net.hidden_sizes() == std::vector<int>{1000, 1000});
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  namespace fs = std::filesystem;
  fc::ForecastModel model;
  model.net = std::make_unique<fc::GruForecaster>(6, std::vector<int>{8, 4}, 24, 42);
  model.stats.feature_names = {"temperature", "solar_radiation", "humidity",
                               "log10_cn2", "t_x", "t_y"};
  model.stats.min = VectorXd::LinSpaced(6, -2, 3);
  model.stats.max = VectorXd::LinSpaced(6, 5, 11);
  model.in_len = 720;
  model.out_res_min = 15;
  model.seed = 42;
  model.config_hash = 0xdeadbeef12345678ull;

  const fs::path p1 = fs::temp_directory_path() / "model_rt.ckpt";
  const fs::path p2 = fs::temp_directory_path() / "model_rt2.ckpt";
  fc::save_checkpoint(p1, model);
  const auto loaded = fc::load_checkpoint(p1);
  CHECK(loaded.net->params() == model.net->params());
  CHECK(loaded.stats.feature_names == model.stats.feature_names);
  CHECK(loaded.stats.min == model.stats.min);
  CHECK(loaded.seed == model.seed);
  CHECK(loaded.config_hash == model.config_hash);
  CHECK(loaded.in_len == 720);
  fc::save_checkpoint(p2, loaded);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
}

TEST_CASE("cascaded prediction") {
  // build a gap-free minute series and a zero-weight model over basic features
  const auto features = ts::basic_features();
  ts::MinuteSeries series;
  series.start = 1688169600;
  const int minutes = 3 * 1440;
  series.records.resize(minutes);
  series.gap.assign(minutes, 0);
  for (int i = 0; i < minutes; ++i) {
    auto& r = series.records[i];
    r.timestamp = series.minute(i);
    r.temperature_c = 20.0;
    r.solar_radiation_kj_m2 = 100.0;
    r.relative_humidity_pct = 50.0;
    r.log10_cn2 = -15.0 + 0.5 * std::sin(2 * 3.14159 * i / 1440.0);
  }

  fc::ForecastModel model;
  model.net = std::make_unique<fc::GruForecaster>(6, std::vector<int>{4}, 24, 1);
  model.net->params().setZero();
  model.stats.feature_names = features.names;
  model.stats.min.resize(6);
  model.stats.max.resize(6);
  model.stats.min << 15, 0, 0, -16, -1, -1;
  model.stats.max << 25, 4000, 100, -14, 1, 1;
  model.in_len = 720;
  model.out_res_min = 15;

  const std::int64_t start = series.minute(720);

  SUBCASE("6-hour horizon yields a single block of 24 points") {
    const auto points = fc::predict_cascade(model, series, start, 6, features);
    REQUIRE(points.size() == 24);
    CHECK(points.front().timestamp == start + 15 * 60);
    CHECK(points.back().timestamp == start + 360 * 60);
    // zero-weight model predicts denormalized bias = -16 + 0 * 2
    CHECK(points[0].log10_cn2_pred == doctest::Approx(-16.0));
    CHECK(points[0].log10_cn2_true.has_value());
  }

  SUBCASE("24-hour horizon concatenates 4 contiguous blocks") {
    const auto points = fc::predict_cascade(model, series, start, 24, features);
    REQUIRE(points.size() == 96);
    for (std::size_t i = 1; i < points.size(); ++i)
      CHECK(points[i].timestamp - points[i - 1].timestamp == 15 * 60);
  }

  SUBCASE("12-hour horizon is supported") {
    const auto points = fc::predict_cascade(model, series, start, 12, features);
    CHECK(points.size() == 48);
  }

  SUBCASE("start inside a gap raises") {
    ts::MinuteSeries gappy = series;
    gappy.gap[800] = 1;
    CHECK_THROWS_AS(fc::predict_cascade(model, gappy, series.minute(810), 6, features),
                    numeric_error);
  }

  SUBCASE("later blocks skip over gaps") {
    ts::MinuteSeries gappy = series;
    // gap inside the second block's input window [361, 1080] but past the
    // first block's inputs [1, 720]
    for (int i = 900; i < 906; ++i) gappy.gap[i] = 1;
    const auto points = fc::predict_cascade(model, gappy, start, 12, features);
    CHECK(points.size() == 24);  // second block dropped
  }

  SUBCASE("autoregressive flag substitutes predictions for later inputs") {
    const auto points = fc::predict_cascade(model, series, start, 12, features, true);
    CHECK(points.size() == 48);  // gap-free: same shape, predictions feed block 2
  }
}
