#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace turbcast::ts {

// One minute of aligned weather + scintillometer data.
struct SampleRecord {
  std::int64_t timestamp = 0;  // UTC epoch seconds, minute-aligned
  std::optional<double> temperature_c;
  std::optional<double> solar_radiation_kj_m2;
  std::optional<double> relative_humidity_pct;
  std::optional<double> log10_cn2;  // sane physical band [-18, -11]
  std::optional<double> pressure_hpa;
  std::optional<double> wind_speed_m_s;
  std::optional<double> snow_on_ground_cm;
};

constexpr double kLog10Cn2Min = -18.0;
constexpr double kLog10Cn2Max = -11.0;

struct IngestIssue {
  int line = 0;
  std::string reason;
};

struct WeatherIngestResult {
  std::vector<SampleRecord> records;  // sorted, unique timestamps
  std::vector<IngestIssue> rejected;
  int duplicates = 0;  // rows collapsed by last-wins
};

// Header: timestamp_utc,temperature_c,solar_radiation_kj_m2,
// relative_humidity_pct[,pressure_hpa,wind_speed_m_s,snow_on_ground_cm]
WeatherIngestResult ingest_weather_csv(const std::filesystem::path& path);

struct ScintPoint {
  std::int64_t timestamp = 0;
  double cn2 = 0;  // m^(-2/3), positive
};

struct GapSpan {
  std::int64_t start = 0;  // first missing minute
  std::int64_t end = 0;    // first present minute after the gap
  int minutes() const { return static_cast<int>((end - start) / 60); }
};

struct ScintIngestResult {
  std::vector<ScintPoint> points;
  std::vector<IngestIssue> rejected;
  std::vector<GapSpan> gaps;  // spacing > 1 min between consecutive rows
  int duplicates = 0;
};

// Header: timestamp_utc,cn2_m_minus_2_3
ScintIngestResult ingest_scintillometer_csv(const std::filesystem::path& path);

// Minute-resolution grid over the common span of the two sources.
struct MinuteSeries {
  std::int64_t start = 0;            // epoch seconds of minute 0
  std::vector<SampleRecord> records;  // one per minute
  std::vector<char> gap;              // 1 = minute unusable

  std::size_t size() const { return records.size(); }
  std::int64_t minute(std::size_t i) const { return start + 60 * static_cast<std::int64_t>(i); }
  std::size_t gap_count() const;
  std::vector<GapSpan> gap_spans() const;
};

struct AlignOptions {
  int fill_horizon_min = 60;  // forward-fill limit for coarse weather features
};

MinuteSeries align_series(const std::vector<SampleRecord>& weather,
                          const std::vector<ScintPoint>& scint,
                          const AlignOptions& opts = {});

struct AverageOptions {
  int window_min = 60;
  double gap_tolerance = 0.25;  // window marked gap above this missing fraction
  bool centered = false;        // default trailing (causal)
  bool linear_domain = false;   // average raw Cn2 instead of log10
};

// Moving average of the log10_cn2 channel; other channels pass through.
MinuteSeries moving_average_log_cn2(const MinuteSeries& series,
                                    const AverageOptions& opts = {});

// Daily-periodic encoding of UTC time: (cos, sin) of 2*pi*t/86400.
std::pair<double, double> periodic_time_features(std::int64_t timestamp);

// Named feature channels used to build model inputs.
struct FeatureSet {
  std::vector<std::string> names;
  int log10_cn2_column() const;
};

FeatureSet basic_features();     // temperature, solar_radiation, humidity, log10_cn2, t_x, t_y
FeatureSet extended_features();  // + pressure, wind_speed, snow_on_ground

// Per-feature min/max over the training split; frozen once computed.
struct NormalizationStats {
  std::vector<std::string> feature_names;
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  int feature_count() const { return static_cast<int>(feature_names.size()); }
  int column(const std::string& name) const;
};

// X -> (X - min)/(max - min), per column. No clamping.
Eigen::MatrixXd normalize(const Eigen::MatrixXd& features, const NormalizationStats& stats);
Eigen::MatrixXd denormalize(const Eigen::MatrixXd& features, const NormalizationStats& stats);
// Target channel (log10_cn2) uses the shared feature min/max.
Eigen::VectorXd normalize_target(const Eigen::VectorXd& target, const NormalizationStats& stats);
Eigen::VectorXd denormalize_target(const Eigen::VectorXd& target, const NormalizationStats& stats);

struct WindowedExample {
  std::int64_t start_timestamp = 0;  // first input minute
  Eigen::MatrixXd inputs;            // in_len x F, raw units
  Eigen::VectorXd target;            // n_out raw log10_cn2 values
};

struct WindowOptions {
  int in_len = 720;       // minutes of prior data
  int horizon_min = 360;  // forecast span
  int out_res_min = 15;   // output resolution; must divide horizon_min
  int stride_min = 15;

  int n_out() const { return horizon_min / out_res_min; }
  int span_min() const { return in_len + horizon_min; }
};

struct WindowingResult {
  std::vector<WindowedExample> examples;
  std::string notice;  // set when the series was too short
};

WindowingResult make_windows(const MinuteSeries& series, const FeatureSet& features,
                             const WindowOptions& opts = {});

struct DatasetSplit {
  std::vector<WindowedExample> train;
  std::vector<WindowedExample> validation;
  std::vector<WindowedExample> test;
  std::string descriptor;
};

struct SplitOptions {
  enum class Mode { fractions, month };
  Mode mode = Mode::fractions;
  std::string month;  // "YYYY-MM", used by Mode::month
  double train = 0.75, validation = 0.15, test = 0.10;  // fractions mode
  double month_train = 0.85, month_validation = 0.15;   // month mode remainder
};

// Splits are contiguous in time; boundary windows whose 18-hour span would
// overlap an earlier split are dropped.
DatasetSplit split_dataset(const std::vector<WindowedExample>& examples,
                           const SplitOptions& opts, const WindowOptions& wopts = {});

// Min/max over the training examples only. The log10_cn2 channel's range
// covers both the input column and the target values (shared scale).
NormalizationStats compute_stats(const std::vector<WindowedExample>& train,
                                 const FeatureSet& features);

// Model-ready views: normalized inputs and targets.
struct NormalizedDataset {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::VectorXd> targets;
  std::vector<std::int64_t> start_timestamps;

  std::size_t size() const { return inputs.size(); }
};

NormalizedDataset prepare(const std::vector<WindowedExample>& examples,
                          const NormalizationStats& stats);

// Aligned-series CSV (one row per minute, is_gap flag). See README.
void write_aligned_csv(const std::filesystem::path& path, const MinuteSeries& series,
                       const std::string& meta_comment = "");
MinuteSeries read_aligned_csv(const std::filesystem::path& path);

// Flattened windows for cross-implementation comparison: one row per example,
// inputs step-major, then targets, raw units.
void write_windows_csv(const std::filesystem::path& path,
                       const std::vector<WindowedExample>& examples,
                       const FeatureSet& features);

}  // namespace turbcast::ts
