#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "turbcast/timeseries.hpp"

namespace turbcast::fc {

struct TrainConfig {
  int batch_size = 32;
  double initial_lr = 1e-4;
  int patience = 15;              // epochs without significant val improvement
  double reduction_factor = 0.1;  // lr multiplier on plateau
  double plateau_threshold = 1e-5;
  int max_epochs = 200;
  std::uint64_t seed = 1;
};

// Views into the flat parameter buffer of one GRU layer.
// Gate order is fixed: update z, reset r, candidate n.
struct GruLayerView {
  Eigen::Map<Eigen::MatrixXd> Wz, Wr, Wn;  // hidden x input
  Eigen::Map<Eigen::MatrixXd> Uz, Ur, Un;  // hidden x hidden
  Eigen::Map<Eigen::VectorXd> bz, br, bn;  // hidden
};
struct GruLayerConstView {
  Eigen::Map<const Eigen::MatrixXd> Wz, Wr, Wn;
  Eigen::Map<const Eigen::MatrixXd> Uz, Ur, Un;
  Eigen::Map<const Eigen::VectorXd> bz, br, bn;
};

// z = sigmoid(Wz x + Uz h + bz); r = sigmoid(Wr x + Ur h + br)
// n = tanh(Wn x + r .* (Un h) + bn); h' = (1 - z) .* n + z .* h
Eigen::VectorXd gru_cell_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                                 const GruLayerConstView& layer);

// Mean over examples of the squared Euclidean distance of output vectors.
double mse_loss(const std::vector<Eigen::VectorXd>& pred,
                const std::vector<Eigen::VectorXd>& truth);

// Common surface of the GRU forecaster and the MLP baseline: flat parameter
// vector plus batched loss/gradient, which is all the trainer needs.
class ForecastNet {
 public:
  virtual ~ForecastNet() = default;
  virtual std::string kind() const = 0;
  virtual int input_features() const = 0;
  virtual int n_out() const = 0;
  virtual std::vector<int> hidden_sizes() const = 0;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& inputs) const = 0;  // T x F
  // Accumulates batch loss and writes the full gradient; returns the loss.
  virtual double loss_and_gradient(const std::vector<const Eigen::MatrixXd*>& inputs,
                                   const std::vector<const Eigen::VectorXd*>& targets,
                                   Eigen::VectorXd& grad) const = 0;
  virtual Eigen::VectorXd& params() = 0;
  virtual const Eigen::VectorXd& params() const = 0;
  virtual std::unique_ptr<ForecastNet> clone() const = 0;
};

// Stacked GRU layers + fully connected head reading the final hidden state.
class GruForecaster final : public ForecastNet {
 public:
  GruForecaster(int input_features, std::vector<int> hidden, int n_out, std::uint64_t seed);

  std::string kind() const override { return "gru"; }
  int input_features() const override { return input_features_; }
  int n_out() const override { return n_out_; }
  std::vector<int> hidden_sizes() const override { return hidden_; }
  Eigen::VectorXd predict(const Eigen::MatrixXd& inputs) const override;
  double loss_and_gradient(const std::vector<const Eigen::MatrixXd*>& inputs,
                           const std::vector<const Eigen::VectorXd*>& targets,
                           Eigen::VectorXd& grad) const override;
  Eigen::VectorXd& params() override { return theta_; }
  const Eigen::VectorXd& params() const override { return theta_; }
  std::unique_ptr<ForecastNet> clone() const override {
    return std::make_unique<GruForecaster>(*this);
  }

  int layer_count() const { return static_cast<int>(hidden_.size()); }
  GruLayerView layer(int i);
  GruLayerConstView layer(int i) const;
  Eigen::Map<Eigen::MatrixXd> head_w();
  Eigen::Map<const Eigen::MatrixXd> head_w() const;
  Eigen::Map<Eigen::VectorXd> head_b();
  Eigen::Map<const Eigen::VectorXd> head_b() const;

 private:
  struct LayerOffsets {
    int input = 0, hidden = 0;
    std::ptrdiff_t Wz, Wr, Wn, Uz, Ur, Un, bz, br, bn;
  };
  GruLayerConstView layer_view(const Eigen::VectorXd& buf, int i) const;
  GruLayerView layer_view(Eigen::VectorXd& buf, int i) const;

  int input_features_;
  std::vector<int> hidden_;
  int n_out_;
  std::vector<LayerOffsets> offsets_;
  std::ptrdiff_t head_w_off_ = 0, head_b_off_ = 0;
  Eigen::VectorXd theta_;
};

// Flattened-input fully connected baseline: ReLU-separated hidden layers.
class MlpBaseline final : public ForecastNet {
 public:
  MlpBaseline(int input_features, int in_len, std::vector<int> hidden, int n_out,
              std::uint64_t seed);

  std::string kind() const override { return "mlp"; }
  int input_features() const override { return input_features_; }
  int in_len() const { return in_len_; }
  int n_out() const override { return n_out_; }
  std::vector<int> hidden_sizes() const override { return hidden_; }
  Eigen::VectorXd predict(const Eigen::MatrixXd& inputs) const override;
  double loss_and_gradient(const std::vector<const Eigen::MatrixXd*>& inputs,
                           const std::vector<const Eigen::VectorXd*>& targets,
                           Eigen::VectorXd& grad) const override;
  Eigen::VectorXd& params() override { return theta_; }
  const Eigen::VectorXd& params() const override { return theta_; }
  std::unique_ptr<ForecastNet> clone() const override {
    return std::make_unique<MlpBaseline>(*this);
  }

  Eigen::Map<Eigen::MatrixXd> weight(int i);
  Eigen::Map<Eigen::VectorXd> bias(int i);

 private:
  int input_features_, in_len_, n_out_;
  std::vector<int> hidden_;
  std::vector<int> dims_;  // layer io sizes: [in, h..., out]
  std::vector<std::ptrdiff_t> w_off_, b_off_;
  Eigen::VectorXd theta_;
};

MlpBaseline build_mlp_baseline(int input_features, int in_len, int n_out,
                               std::uint64_t seed, std::vector<int> hidden = {1000, 1000});

// Full-batch gradient for one example; convenience wrapper used by the
// finite-difference checks.
Eigen::VectorXd backward(const ForecastNet& net, const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& target);

struct AdamState {
  Eigen::VectorXd m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
};

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               double lr);

// Reduce-on-plateau learning rate: after `patience` consecutive epochs whose
// validation loss fails to improve on the best seen by more than `threshold`,
// multiply the rate by `factor`.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, int patience, double factor, double threshold)
      : lr_(initial_lr), patience_(patience), factor_(factor), threshold_(threshold) {}

  double observe(double val_loss);
  double lr() const { return lr_; }
  int stalled_epochs() const { return stalled_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int stalled_ = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_mse = 0, val_mse = 0, lr = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val = std::numeric_limits<double>::infinity();
};

// Seeded-shuffle epoch loop with Adam, plateau schedule and best-validation
// parameter retention. Deterministic for a fixed (net seed, config seed).
TrainHistory train(ForecastNet& net, const ts::NormalizedDataset& train_set,
                   const ts::NormalizedDataset& val_set, const TrainConfig& config);

struct EvalReport {
  std::vector<double> per_example_rmse;
  double mean_rmse = 0;
  double delta = 1;                 // 1 - mean_rmse
  Eigen::VectorXd per_step_rmse;    // horizon profile, length n_out
};

// Per-example RMSE = sqrt(mean over the n_out outputs of squared error),
// in normalized units; report averages over examples.
EvalReport evaluate(const ForecastNet& net, const ts::NormalizedDataset& data);

// Repeat-last-value baseline evaluated with the same RMSE convention.
EvalReport evaluate_persistence(const ts::NormalizedDataset& data, int cn2_column);

// Trained model bundle: network + the normalization contract it was trained
// under.
struct ForecastModel {
  std::unique_ptr<ForecastNet> net;
  ts::NormalizationStats stats;
  int in_len = 720;
  int out_res_min = 15;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

struct ForecastPoint {
  std::int64_t timestamp = 0;
  double log10_cn2_pred = 0;
  std::optional<double> log10_cn2_true;
  double window_rmse = 0;  // normalized RMSE of the 6-hour block (when truth known)
};

// Consecutive fixed-horizon predictions starting at `start` (the last
// observed minute feeding the first block). Blocks whose input window crosses
// a gap are skipped. With `autoregressive`, previously predicted Cn2 values
// replace measurements in later input windows (held constant between output
// steps).
std::vector<ForecastPoint> predict_cascade(const ForecastModel& model,
                                           const ts::MinuteSeries& series,
                                           std::int64_t start, int horizon_hours,
                                           const ts::FeatureSet& features,
                                           bool autoregressive = false);

// Versioned flat binary checkpoint; round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const ForecastModel& model);
ForecastModel load_checkpoint(const std::filesystem::path& path);

}  // namespace turbcast::fc
