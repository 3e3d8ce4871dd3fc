#include "turbcast/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "turbcast/common.hpp"

namespace turbcast::fc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd sigmoid(const MatrixXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

void check_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw numeric_error(std::string("non-finite values in ") + what);
}

// uniform +-sqrt(1/fan_in) initialization for one weight block
void init_block(Eigen::Map<MatrixXd> w, int fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
}

}  // namespace

Eigen::VectorXd gru_cell_forward(const VectorXd& x, const VectorXd& h_prev,
                                 const GruLayerConstView& layer) {
  if (x.size() != layer.Wz.cols() || h_prev.size() != layer.Uz.cols())
    throw numeric_error("gru_cell_forward: shape mismatch");
  if (!x.allFinite() || !h_prev.allFinite())
    throw numeric_error("gru_cell_forward: non-finite input");
  const VectorXd z = sigmoid(layer.Wz * x + layer.Uz * h_prev + layer.bz);
  const VectorXd r = sigmoid(layer.Wr * x + layer.Ur * h_prev + layer.br);
  const VectorXd n =
      (layer.Wn * x + (r.array() * (layer.Un * h_prev).array()).matrix() + layer.bn)
          .array()
          .tanh()
          .matrix();
  return ((1.0 - z.array()) * n.array() + z.array() * h_prev.array()).matrix();
}

double mse_loss(const std::vector<VectorXd>& pred, const std::vector<VectorXd>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw numeric_error("mse_loss: size mismatch or empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    total += (pred[i] - truth[i]).squaredNorm();
  return total / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// GruForecaster

GruForecaster::GruForecaster(int input_features, std::vector<int> hidden, int n_out,
                             std::uint64_t seed)
    : input_features_(input_features), hidden_(std::move(hidden)), n_out_(n_out) {
  if (input_features_ < 1 || n_out_ < 1 || hidden_.empty())
    throw config_error("GruForecaster: invalid dimensions");
  for (int h : hidden_)
    if (h < 1) throw config_error("GruForecaster: hidden sizes must be positive");

  std::ptrdiff_t off = 0;
  int in = input_features_;
  for (int h : hidden_) {
    LayerOffsets lo;
    lo.input = in;
    lo.hidden = h;
    lo.Wz = off; off += static_cast<std::ptrdiff_t>(h) * in;
    lo.Wr = off; off += static_cast<std::ptrdiff_t>(h) * in;
    lo.Wn = off; off += static_cast<std::ptrdiff_t>(h) * in;
    lo.Uz = off; off += static_cast<std::ptrdiff_t>(h) * h;
    lo.Ur = off; off += static_cast<std::ptrdiff_t>(h) * h;
    lo.Un = off; off += static_cast<std::ptrdiff_t>(h) * h;
    lo.bz = off; off += h;
    lo.br = off; off += h;
    lo.bn = off; off += h;
    offsets_.push_back(lo);
    in = h;
  }
  head_w_off_ = off;
  off += static_cast<std::ptrdiff_t>(n_out_) * hidden_.back();
  head_b_off_ = off;
  off += n_out_;
  theta_ = VectorXd::Zero(off);

  Rng rng(seed);
  for (int l = 0; l < layer_count(); ++l) {
    auto v = layer(l);
    init_block(v.Wz, offsets_[l].input, rng);
    init_block(v.Wr, offsets_[l].input, rng);
    init_block(v.Wn, offsets_[l].input, rng);
    init_block(v.Uz, offsets_[l].hidden, rng);
    init_block(v.Ur, offsets_[l].hidden, rng);
    init_block(v.Un, offsets_[l].hidden, rng);
    // biases start at zero
  }
  init_block(head_w(), hidden_.back(), rng);
}

GruLayerView GruForecaster::layer_view(VectorXd& buf, int i) const {
  const LayerOffsets& o = offsets_[i];
  double* p = buf.data();
  return {
      {p + o.Wz, o.hidden, o.input}, {p + o.Wr, o.hidden, o.input},
      {p + o.Wn, o.hidden, o.input}, {p + o.Uz, o.hidden, o.hidden},
      {p + o.Ur, o.hidden, o.hidden}, {p + o.Un, o.hidden, o.hidden},
      {p + o.bz, o.hidden}, {p + o.br, o.hidden}, {p + o.bn, o.hidden}};
}

GruLayerConstView GruForecaster::layer_view(const VectorXd& buf, int i) const {
  const LayerOffsets& o = offsets_[i];
  const double* p = buf.data();
  return {
      {p + o.Wz, o.hidden, o.input}, {p + o.Wr, o.hidden, o.input},
      {p + o.Wn, o.hidden, o.input}, {p + o.Uz, o.hidden, o.hidden},
      {p + o.Ur, o.hidden, o.hidden}, {p + o.Un, o.hidden, o.hidden},
      {p + o.bz, o.hidden}, {p + o.br, o.hidden}, {p + o.bn, o.hidden}};
}

GruLayerView GruForecaster::layer(int i) { return layer_view(theta_, i); }
GruLayerConstView GruForecaster::layer(int i) const { return layer_view(theta_, i); }

Eigen::Map<MatrixXd> GruForecaster::head_w() {
  return {theta_.data() + head_w_off_, n_out_, hidden_.back()};
}
Eigen::Map<const MatrixXd> GruForecaster::head_w() const {
  return {theta_.data() + head_w_off_, n_out_, hidden_.back()};
}
Eigen::Map<VectorXd> GruForecaster::head_b() {
  return {theta_.data() + head_b_off_, n_out_};
}
Eigen::Map<const VectorXd> GruForecaster::head_b() const {
  return {theta_.data() + head_b_off_, n_out_};
}

Eigen::VectorXd GruForecaster::predict(const MatrixXd& inputs) const {
  if (inputs.cols() != input_features_)
    throw numeric_error("predict: feature count mismatch");
  check_finite(inputs, "model inputs");
  VectorXd h_below;
  std::vector<VectorXd> seq(inputs.rows());
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) seq[t] = inputs.row(t).transpose();
  for (int l = 0; l < layer_count(); ++l) {
    const auto v = layer(l);
    VectorXd h = VectorXd::Zero(offsets_[l].hidden);
    for (auto& x : seq) {
      h = gru_cell_forward(x, h, v);
      x = h;  // layer output becomes input of the layer above
    }
  }
  return head_w() * seq.back() + head_b();
}

double GruForecaster::loss_and_gradient(const std::vector<const MatrixXd*>& inputs,
                                        const std::vector<const VectorXd*>& targets,
                                        VectorXd& grad) const {
  const int B = static_cast<int>(inputs.size());
  if (B == 0 || targets.size() != inputs.size())
    throw numeric_error("loss_and_gradient: empty or mismatched batch");
  const Eigen::Index T = inputs[0]->rows();
  for (const auto* x : inputs)
    if (x->rows() != T || x->cols() != input_features_)
      throw numeric_error("loss_and_gradient: inconsistent input shapes");

  grad.setZero(theta_.size());
  const int L = layer_count();

  // column-per-example layout
  std::vector<MatrixXd> x_seq(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    x_seq[t].resize(input_features_, B);
    for (int b = 0; b < B; ++b) x_seq[t].col(b) = inputs[b]->row(t).transpose();
  }

  struct LayerCache {
    std::vector<MatrixXd> z, r, n, unh, h;
  };
  std::vector<LayerCache> cache(L);
  std::vector<const std::vector<MatrixXd>*> layer_in(L);  // input sequence per layer

  // forward
  const std::vector<MatrixXd>* seq = &x_seq;
  for (int l = 0; l < L; ++l) {
    layer_in[l] = seq;
    const auto v = layer(l);
    const int H = offsets_[l].hidden;
    LayerCache& c = cache[l];
    c.z.resize(T); c.r.resize(T); c.n.resize(T); c.unh.resize(T); c.h.resize(T);
    MatrixXd h = MatrixXd::Zero(H, B);
    for (Eigen::Index t = 0; t < T; ++t) {
      const MatrixXd& x = (*layer_in[l])[t];
      MatrixXd az = v.Wz * x + v.Uz * h;
      az.colwise() += v.bz;
      MatrixXd ar = v.Wr * x + v.Ur * h;
      ar.colwise() += v.br;
      c.z[t] = sigmoid(az);
      c.r[t] = sigmoid(ar);
      c.unh[t] = v.Un * h;
      MatrixXd an = v.Wn * x + (c.r[t].array() * c.unh[t].array()).matrix();
      an.colwise() += v.bn;
      c.n[t] = an.array().tanh().matrix();
      c.h[t] =
          ((1.0 - c.z[t].array()) * c.n[t].array() + c.z[t].array() * h.array()).matrix();
      h = c.h[t];
    }
    seq = &c.h;
  }

  // head + loss
  const MatrixXd& h_last = cache[L - 1].h[T - 1];
  MatrixXd pred = head_w() * h_last;
  pred.colwise() += head_b();
  MatrixXd diff(n_out_, B);
  for (int b = 0; b < B; ++b) diff.col(b) = pred.col(b) - *targets[b];
  const double loss = diff.squaredNorm() / B;
  if (!std::isfinite(loss)) throw numeric_error("loss_and_gradient: non-finite loss");

  const MatrixXd d_pred = (2.0 / B) * diff;
  VectorXd& g = grad;
  {
    Eigen::Map<MatrixXd> gw(g.data() + head_w_off_, n_out_, hidden_.back());
    Eigen::Map<VectorXd> gb(g.data() + head_b_off_, n_out_);
    gw.noalias() = d_pred * h_last.transpose();
    gb = d_pred.rowwise().sum();
  }

  // backward through the stack
  std::vector<MatrixXd> d_from_above;  // gradient w.r.t. this layer's outputs
  for (int l = L - 1; l >= 0; --l) {
    const auto v = layer(l);
    auto gv = layer_view(g, l);
    const int H = offsets_[l].hidden;
    const LayerCache& c = cache[l];
    const bool emit_dx = l > 0;
    std::vector<MatrixXd> d_below;
    if (emit_dx) d_below.assign(T, MatrixXd());

    const MatrixXd h_zero = MatrixXd::Zero(H, B);
    MatrixXd carry = MatrixXd::Zero(H, B);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      MatrixXd dh = carry;
      if (l == L - 1) {
        if (t == T - 1) dh.noalias() += head_w().transpose() * d_pred;
      } else {
        dh += d_from_above[t];
      }
      const MatrixXd& h_prev = (t == 0) ? h_zero : c.h[t - 1];
      const MatrixXd& x = (*layer_in[l])[t];

      MatrixXd dn = (dh.array() * (1.0 - c.z[t].array())).matrix();
      MatrixXd dz = (dh.array() * (h_prev.array() - c.n[t].array())).matrix();
      MatrixXd dh_prev = (dh.array() * c.z[t].array()).matrix();

      MatrixXd dan = (dn.array() * (1.0 - c.n[t].array().square())).matrix();
      gv.Wn.noalias() += dan * x.transpose();
      gv.bn += dan.rowwise().sum();
      MatrixXd dr = (dan.array() * c.unh[t].array()).matrix();
      MatrixXd dan_r = (dan.array() * c.r[t].array()).matrix();
      gv.Un.noalias() += dan_r * h_prev.transpose();
      dh_prev.noalias() += v.Un.transpose() * dan_r;

      MatrixXd daz = (dz.array() * c.z[t].array() * (1.0 - c.z[t].array())).matrix();
      gv.Wz.noalias() += daz * x.transpose();
      gv.Uz.noalias() += daz * h_prev.transpose();
      gv.bz += daz.rowwise().sum();
      dh_prev.noalias() += v.Uz.transpose() * daz;

      MatrixXd dar = (dr.array() * c.r[t].array() * (1.0 - c.r[t].array())).matrix();
      gv.Wr.noalias() += dar * x.transpose();
      gv.Ur.noalias() += dar * h_prev.transpose();
      gv.br += dar.rowwise().sum();
      dh_prev.noalias() += v.Ur.transpose() * dar;

      if (emit_dx) {
        d_below[t].noalias() = v.Wz.transpose() * daz;
        d_below[t].noalias() += v.Wr.transpose() * dar;
        d_below[t].noalias() += v.Wn.transpose() * dan;
      }
      carry = std::move(dh_prev);
    }
    d_from_above = std::move(d_below);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// MlpBaseline

MlpBaseline::MlpBaseline(int input_features, int in_len, std::vector<int> hidden,
                         int n_out, std::uint64_t seed)
    : input_features_(input_features), in_len_(in_len), n_out_(n_out),
      hidden_(std::move(hidden)) {
  if (input_features_ < 1 || in_len_ < 1 || n_out_ < 1)
    throw config_error("MlpBaseline: invalid dimensions");
  dims_.push_back(input_features_ * in_len_);
  for (int h : hidden_) {
    if (h < 1) throw config_error("MlpBaseline: hidden sizes must be positive");
    dims_.push_back(h);
  }
  dims_.push_back(n_out_);

  std::ptrdiff_t off = 0;
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    w_off_.push_back(off);
    off += static_cast<std::ptrdiff_t>(dims_[i + 1]) * dims_[i];
    b_off_.push_back(off);
    off += dims_[i + 1];
  }
  theta_ = VectorXd::Zero(off);
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) init_block(weight(i), dims_[i], rng);
}

Eigen::Map<MatrixXd> MlpBaseline::weight(int i) {
  return {theta_.data() + w_off_[i], dims_[i + 1], dims_[i]};
}
Eigen::Map<VectorXd> MlpBaseline::bias(int i) {
  return {theta_.data() + b_off_[i], dims_[i + 1]};
}

Eigen::VectorXd MlpBaseline::predict(const MatrixXd& inputs) const {
  if (inputs.rows() != in_len_ || inputs.cols() != input_features_)
    throw numeric_error("mlp predict: shape mismatch");
  check_finite(inputs, "model inputs");
  // step-major flatten: features of step 0 first
  VectorXd a(dims_[0]);
  for (int t = 0; t < in_len_; ++t)
    a.segment(static_cast<Eigen::Index>(t) * input_features_, input_features_) =
        inputs.row(t).transpose();
  auto& self = const_cast<MlpBaseline&>(*this);
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    a = (self.weight(static_cast<int>(i)) * a + self.bias(static_cast<int>(i))).eval();
    if (i + 2 < dims_.size()) a = a.cwiseMax(0.0);
  }
  return a;
}

double MlpBaseline::loss_and_gradient(const std::vector<const MatrixXd*>& inputs,
                                      const std::vector<const VectorXd*>& targets,
                                      VectorXd& grad) const {
  const int B = static_cast<int>(inputs.size());
  if (B == 0 || targets.size() != inputs.size())
    throw numeric_error("loss_and_gradient: empty or mismatched batch");
  grad.setZero(theta_.size());
  auto& self = const_cast<MlpBaseline&>(*this);
  const int n_layers = static_cast<int>(dims_.size()) - 1;

  MatrixXd a(dims_[0], B);
  for (int b = 0; b < B; ++b) {
    const MatrixXd& x = *inputs[b];
    if (x.rows() != in_len_ || x.cols() != input_features_)
      throw numeric_error("loss_and_gradient: shape mismatch");
    for (int t = 0; t < in_len_; ++t)
      a.block(static_cast<Eigen::Index>(t) * input_features_, b, input_features_, 1) =
          x.row(t).transpose();
  }

  std::vector<MatrixXd> acts;  // post-activation outputs, acts[0] = input
  acts.push_back(a);
  for (int i = 0; i < n_layers; ++i) {
    MatrixXd z = self.weight(i) * acts.back();
    z.colwise() += self.bias(i);
    if (i + 1 < n_layers) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }

  MatrixXd diff(n_out_, B);
  for (int b = 0; b < B; ++b) diff.col(b) = acts.back().col(b) - *targets[b];
  const double loss = diff.squaredNorm() / B;
  if (!std::isfinite(loss)) throw numeric_error("loss_and_gradient: non-finite loss");

  MatrixXd delta = (2.0 / B) * diff;
  for (int i = n_layers - 1; i >= 0; --i) {
    Eigen::Map<MatrixXd> gw(grad.data() + w_off_[i], dims_[i + 1], dims_[i]);
    Eigen::Map<VectorXd> gb(grad.data() + b_off_[i], dims_[i + 1]);
    gw.noalias() = delta * acts[i].transpose();
    gb = delta.rowwise().sum();
    if (i > 0) {
      MatrixXd d_prev = self.weight(i).transpose() * delta;
      // ReLU mask of the layer below's output
      delta = ((acts[i].array() > 0.0).cast<double>() * d_prev.array()).matrix();
    }
  }
  return loss;
}

MlpBaseline build_mlp_baseline(int input_features, int in_len, int n_out,
                               std::uint64_t seed, std::vector<int> hidden) {
  return MlpBaseline(input_features, in_len, std::move(hidden), n_out, seed);
}

Eigen::VectorXd backward(const ForecastNet& net, const MatrixXd& inputs,
                         const VectorXd& target) {
  VectorXd grad;
  std::vector<const MatrixXd*> xs{&inputs};
  std::vector<const VectorXd*> ys{&target};
  net.loss_and_gradient(xs, ys, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Optimizer, schedule, training loop

void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state, double lr) {
  if (params.size() != grad.size()) throw numeric_error("adam_step: size mismatch");
  if (state.m.size() != params.size()) {
    state.m = VectorXd::Zero(params.size());
    state.v = VectorXd::Zero(params.size());
    state.t = 0;
  }
  ++state.t;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  params.array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.epsilon);
}

double PlateauScheduler::observe(double val_loss) {
  if (val_loss < best_ - threshold_) {
    best_ = val_loss;
    stalled_ = 0;
  } else {
    ++stalled_;
    if (stalled_ >= patience_) {
      lr_ *= factor_;
      stalled_ = 0;
    }
  }
  return lr_;
}

namespace {

double dataset_loss(const ForecastNet& net, const ts::NormalizedDataset& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    total += (net.predict(data.inputs[i]) - data.targets[i]).squaredNorm();
  return total / static_cast<double>(data.size());
}

}  // namespace

TrainHistory train(ForecastNet& net, const ts::NormalizedDataset& train_set,
                   const ts::NormalizedDataset& val_set, const TrainConfig& config) {
  if (train_set.size() == 0) throw config_error("train: empty training split");
  if (val_set.size() == 0) throw config_error("train: empty validation split");
  if (config.batch_size < 1 || config.max_epochs < 1 ||
      config.reduction_factor <= 0.0 || config.reduction_factor >= 1.0 ||
      config.initial_lr <= 0.0 || config.patience < 1)
    throw config_error("train: invalid training configuration");

  Rng rng(config.seed);
  AdamState adam;
  PlateauScheduler schedule(config.initial_lr, config.patience, config.reduction_factor,
                            config.plateau_threshold);
  TrainHistory history;
  VectorXd best_params = net.params();
  VectorXd grad;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = schedule.lr();
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += config.batch_size) {
      const std::size_t bs = std::min<std::size_t>(config.batch_size, order.size() - pos);
      std::vector<const MatrixXd*> xs(bs);
      std::vector<const VectorXd*> ys(bs);
      for (std::size_t k = 0; k < bs; ++k) {
        xs[k] = &train_set.inputs[order[pos + k]];
        ys[k] = &train_set.targets[order[pos + k]];
      }
      const double batch_loss = net.loss_and_gradient(xs, ys, grad);
      adam_step(net.params(), grad, adam, lr);
      epoch_loss += batch_loss * static_cast<double>(bs);
      seen += bs;
    }
    const double train_mse = epoch_loss / static_cast<double>(seen);
    const double val_mse = dataset_loss(net, val_set);
    history.epochs.push_back({epoch, train_mse, val_mse, lr});
    if (val_mse < history.best_val) {
      history.best_val = val_mse;
      history.best_epoch = epoch;
      best_params = net.params();
    }
    schedule.observe(val_mse);
  }
  net.params() = best_params;
  return history;
}

EvalReport evaluate(const ForecastNet& net, const ts::NormalizedDataset& data) {
  if (data.size() == 0) throw numeric_error("evaluate: empty dataset");
  EvalReport report;
  const int n_out = net.n_out();
  VectorXd step_sq = VectorXd::Zero(n_out);
  double sum_rmse = 0.0;
  report.per_example_rmse.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const VectorXd err = net.predict(data.inputs[i]) - data.targets[i];
    const double rmse = std::sqrt(err.squaredNorm() / n_out);
    report.per_example_rmse.push_back(rmse);
    sum_rmse += rmse;
    step_sq += err.cwiseProduct(err);
  }
  report.mean_rmse = sum_rmse / static_cast<double>(data.size());
  report.delta = 1.0 - report.mean_rmse;
  report.per_step_rmse = (step_sq / static_cast<double>(data.size())).cwiseSqrt();
  return report;
}

EvalReport evaluate_persistence(const ts::NormalizedDataset& data, int cn2_column) {
  if (data.size() == 0) throw numeric_error("evaluate_persistence: empty dataset");
  EvalReport report;
  const int n_out = static_cast<int>(data.targets.front().size());
  VectorXd step_sq = VectorXd::Zero(n_out);
  double sum_rmse = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double last = data.inputs[i](data.inputs[i].rows() - 1, cn2_column);
    const VectorXd err = VectorXd::Constant(n_out, last) - data.targets[i];
    const double rmse = std::sqrt(err.squaredNorm() / n_out);
    report.per_example_rmse.push_back(rmse);
    sum_rmse += rmse;
    step_sq += err.cwiseProduct(err);
  }
  report.mean_rmse = sum_rmse / static_cast<double>(data.size());
  report.delta = 1.0 - report.mean_rmse;
  report.per_step_rmse = (step_sq / static_cast<double>(data.size())).cwiseSqrt();
  return report;
}

// ---------------------------------------------------------------------------
// Cascaded prediction

std::vector<ForecastPoint> predict_cascade(const ForecastModel& model,
                                           const ts::MinuteSeries& series,
                                           std::int64_t start, int horizon_hours,
                                           const ts::FeatureSet& features,
                                           bool autoregressive) {
  const int n_out = model.net->n_out();
  const int horizon_min = n_out * model.out_res_min;
  if (horizon_hours * 60 % horizon_min != 0)
    throw config_error("prediction horizon must be a multiple of " +
                       std::to_string(horizon_min) + " minutes");
  const int blocks = horizon_hours * 60 / horizon_min;
  if ((start - series.start) % 60 != 0)
    throw numeric_error("start timestamp is not on the series minute grid");

  const int F = static_cast<int>(features.names.size());
  std::vector<ForecastPoint> out;
  std::map<std::int64_t, double> predicted;  // denormalized, for autoregressive mode

  for (int b = 0; b < blocks; ++b) {
    const std::int64_t origin = start + static_cast<std::int64_t>(b) * horizon_min * 60;
    const std::int64_t first_in = origin - static_cast<std::int64_t>(model.in_len - 1) * 60;
    const std::int64_t i0 = (first_in - series.start) / 60;
    if (first_in < series.start ||
        origin > series.minute(series.size() - 1))
      throw numeric_error("prediction window extends outside the dataset");

    // check usability of the input window
    bool usable = true;
    for (int t = 0; t < model.in_len && usable; ++t) {
      const std::size_t idx = static_cast<std::size_t>(i0 + t);
      const std::int64_t m = series.minute(idx);
      if (autoregressive && m > start) {
        // predicted Cn2 substitutes the measurement; weather must be present
        if (series.gap[idx] && !series.records[idx].temperature_c) usable = false;
        continue;
      }
      if (series.gap[idx]) usable = false;
    }
    if (!usable) {
      if (b == 0) throw numeric_error("prediction start lies inside a data gap");
      continue;  // later blocks are skipped over gaps
    }

    Eigen::MatrixXd inputs(model.in_len, F);
    for (int t = 0; t < model.in_len; ++t) {
      const std::size_t idx = static_cast<std::size_t>(i0 + t);
      const ts::SampleRecord& rec = series.records[idx];
      auto [tx, ty] = ts::periodic_time_features(rec.timestamp);
      for (int f = 0; f < F; ++f) {
        const std::string& name = features.names[f];
        double v;
        if (name == "t_x") v = tx;
        else if (name == "t_y") v = ty;
        else if (name == "temperature") v = rec.temperature_c.value_or(0);
        else if (name == "solar_radiation") v = rec.solar_radiation_kj_m2.value_or(0);
        else if (name == "humidity") v = rec.relative_humidity_pct.value_or(0);
        else if (name == "pressure") v = rec.pressure_hpa.value_or(0);
        else if (name == "wind_speed") v = rec.wind_speed_m_s.value_or(0);
        else if (name == "snow_on_ground") v = rec.snow_on_ground_cm.value_or(0);
        else if (name == "log10_cn2") {
          if (autoregressive && rec.timestamp > start) {
            // hold the most recent prediction at or before this minute
            auto it = predicted.upper_bound(rec.timestamp);
            if (it != predicted.begin()) {
              --it;
              v = it->second;
            } else {
              v = rec.log10_cn2.value_or(0);
            }
          } else {
            v = rec.log10_cn2.value_or(0);
          }
        } else {
          throw config_error("unknown feature: " + name);
        }
        inputs(t, f) = v;
      }
    }

    const Eigen::VectorXd pred_norm =
        model.net->predict(ts::normalize(inputs, model.stats));
    const Eigen::VectorXd pred = ts::denormalize_target(pred_norm, model.stats);

    double sq = 0.0;
    int truth_count = 0;
    std::vector<ForecastPoint> block_points(n_out);
    for (int k = 0; k < n_out; ++k) {
      ForecastPoint p;
      p.timestamp = origin + static_cast<std::int64_t>(k + 1) * model.out_res_min * 60;
      p.log10_cn2_pred = pred[k];
      const std::int64_t ti = (p.timestamp - series.start) / 60;
      if (ti >= 0 && ti < static_cast<std::int64_t>(series.size()) &&
          !series.gap[static_cast<std::size_t>(ti)]) {
        p.log10_cn2_true = series.records[static_cast<std::size_t>(ti)].log10_cn2;
      }
      if (p.log10_cn2_true) {
        Eigen::VectorXd t1(1), t2(1);
        t1 << *p.log10_cn2_true;
        const double tn = ts::normalize_target(t1, model.stats)[0];
        sq += (pred_norm[k] - tn) * (pred_norm[k] - tn);
        ++truth_count;
      }
      predicted[p.timestamp] = pred[k];
      block_points[k] = p;
    }
    const double rmse = truth_count ? std::sqrt(sq / truth_count) : 0.0;
    for (auto& p : block_points) {
      p.window_rmse = rmse;
      out.push_back(p);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format (version 1, little-endian):
//   "TCFC" | u32 version | u8 kind (0 gru, 1 mlp) | u64 seed | u64 config_hash
//   | u32 in_len | u32 out_res_min | u32 n_out | u32 input_features
//   | u32 n_hidden | u32 hidden[] | u32 n_features
//   | per feature: u32 name_len, bytes, f64 min, f64 max
//   | u64 param_count | f64 params[]

namespace {

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw io_error("checkpoint truncated");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ForecastModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out.write("TCFC", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint8_t>(out, model.net->kind() == "gru" ? 0 : 1);
  put<std::uint64_t>(out, model.seed);
  put<std::uint64_t>(out, model.config_hash);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.in_len));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.out_res_min));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.net->n_out()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.net->input_features()));
  const auto hidden = model.net->hidden_sizes();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(hidden.size()));
  for (int h : hidden) put<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.stats.feature_names.size()));
  for (std::size_t i = 0; i < model.stats.feature_names.size(); ++i) {
    const std::string& name = model.stats.feature_names[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<double>(out, model.stats.min[static_cast<Eigen::Index>(i)]);
    put<double>(out, model.stats.max[static_cast<Eigen::Index>(i)]);
  }
  const Eigen::VectorXd& theta = model.net->params();
  put<std::uint64_t>(out, static_cast<std::uint64_t>(theta.size()));
  out.write(reinterpret_cast<const char*>(theta.data()),
            static_cast<std::streamsize>(theta.size() * sizeof(double)));
  if (!out) throw io_error("failed writing " + path.string());
}

ForecastModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TCFC", 4) != 0)
    throw io_error("not a checkpoint file: " + path.string());
  const auto version = get<std::uint32_t>(in);
  if (version != 1) throw io_error("unsupported checkpoint version");
  const auto kind = get<std::uint8_t>(in);
  ForecastModel model;
  model.seed = get<std::uint64_t>(in);
  model.config_hash = get<std::uint64_t>(in);
  model.in_len = static_cast<int>(get<std::uint32_t>(in));
  model.out_res_min = static_cast<int>(get<std::uint32_t>(in));
  const int n_out = static_cast<int>(get<std::uint32_t>(in));
  const int in_features = static_cast<int>(get<std::uint32_t>(in));
  const int n_hidden = static_cast<int>(get<std::uint32_t>(in));
  std::vector<int> hidden(n_hidden);
  for (int& h : hidden) h = static_cast<int>(get<std::uint32_t>(in));
  const int n_features = static_cast<int>(get<std::uint32_t>(in));
  model.stats.feature_names.resize(n_features);
  model.stats.min.resize(n_features);
  model.stats.max.resize(n_features);
  for (int i = 0; i < n_features; ++i) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    model.stats.feature_names[i] = name;
    model.stats.min[i] = get<double>(in);
    model.stats.max[i] = get<double>(in);
  }
  if (kind == 0)
    model.net = std::make_unique<GruForecaster>(in_features, hidden, n_out, model.seed);
  else
    model.net = std::make_unique<MlpBaseline>(in_features, model.in_len, hidden, n_out,
                                              model.seed);
  const auto count = get<std::uint64_t>(in);
  if (count != static_cast<std::uint64_t>(model.net->params().size()))
    throw io_error("checkpoint parameter count mismatch");
  in.read(reinterpret_cast<char*>(model.net->params().data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw io_error("checkpoint truncated");
  return model;
}

}  // namespace turbcast::fc
