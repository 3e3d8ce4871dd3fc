#include "turbcast/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "turbcast/common.hpp"
#include "turbcast/csv.hpp"
#include "turbcast/timegrid.hpp"

namespace turbcast::ts {

namespace {

constexpr const char* kWeatherRequired[] = {"timestamp_utc", "temperature_c",
                                            "solar_radiation_kj_m2",
                                            "relative_humidity_pct"};

std::optional<double> field_value(const SampleRecord& r, const std::string& name) {
  if (name == "temperature") return r.temperature_c;
  if (name == "solar_radiation") return r.solar_radiation_kj_m2;
  if (name == "humidity") return r.relative_humidity_pct;
  if (name == "log10_cn2") return r.log10_cn2;
  if (name == "pressure") return r.pressure_hpa;
  if (name == "wind_speed") return r.wind_speed_m_s;
  if (name == "snow_on_ground") return r.snow_on_ground_cm;
  throw config_error("unknown feature: " + name);
}

}  // namespace

WeatherIngestResult ingest_weather_csv(const std::filesystem::path& path) {
  CsvTable table = read_csv(path);
  for (const char* col : kWeatherRequired)
    if (table.column(col) < 0)
      throw io_error(std::string("weather CSV missing required column '") + col +
                     "' in " + path.string());
  if (table.rows.empty()) throw io_error("weather CSV has no data rows: " + path.string());

  const int c_ts = table.column("timestamp_utc");
  const int c_t = table.column("temperature_c");
  const int c_sr = table.column("solar_radiation_kj_m2");
  const int c_rh = table.column("relative_humidity_pct");
  const int c_p = table.column("pressure_hpa");
  const int c_w = table.column("wind_speed_m_s");
  const int c_s = table.column("snow_on_ground_cm");

  WeatherIngestResult result;
  std::map<std::int64_t, SampleRecord> by_ts;  // last row wins per timestamp
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const int line = table.line_numbers[i];
    auto cell = [&](int c) -> const std::string& {
      static const std::string empty;
      return (c >= 0 && c < static_cast<int>(row.size())) ? row[c] : empty;
    };
    try {
      SampleRecord rec;
      rec.timestamp = parse_utc(cell(c_ts));
      if (rec.timestamp % 60 != 0) throw io_error("timestamp not on a minute boundary");
      rec.temperature_c = parse_cell(cell(c_t));
      rec.solar_radiation_kj_m2 = parse_cell(cell(c_sr));
      rec.relative_humidity_pct = parse_cell(cell(c_rh));
      if (rec.relative_humidity_pct &&
          (*rec.relative_humidity_pct < 0.0 || *rec.relative_humidity_pct > 100.0))
        throw io_error("relative humidity outside [0,100]");
      rec.pressure_hpa = parse_cell(cell(c_p));
      rec.wind_speed_m_s = parse_cell(cell(c_w));
      rec.snow_on_ground_cm = parse_cell(cell(c_s));
      if (by_ts.count(rec.timestamp)) ++result.duplicates;
      by_ts[rec.timestamp] = rec;
    } catch (const io_error& e) {
      result.rejected.push_back({line, e.what()});
    }
  }
  result.records.reserve(by_ts.size());
  for (auto& [t, rec] : by_ts) result.records.push_back(rec);
  return result;
}

ScintIngestResult ingest_scintillometer_csv(const std::filesystem::path& path) {
  CsvTable table = read_csv(path);
  const int c_ts = table.column("timestamp_utc");
  const int c_cn2 = table.column("cn2_m_minus_2_3");
  if (c_ts < 0 || c_cn2 < 0)
    throw io_error("scintillometer CSV needs columns timestamp_utc,cn2_m_minus_2_3: " +
                   path.string());
  if (table.rows.empty())
    throw io_error("scintillometer CSV has no data rows: " + path.string());

  ScintIngestResult result;
  std::map<std::int64_t, double> by_ts;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const int line = table.line_numbers[i];
    try {
      if (static_cast<int>(row.size()) <= std::max(c_ts, c_cn2))
        throw io_error("short row");
      std::int64_t t = parse_utc(row[c_ts]);
      if (t % 60 != 0) throw io_error("timestamp not on a minute boundary");
      auto cn2 = parse_cell(row[c_cn2]);
      if (!cn2) throw io_error("missing cn2 value");
      if (*cn2 <= 0.0) throw io_error("cn2 must be positive");
      double lg = std::log10(*cn2);
      if (lg < kLog10Cn2Min || lg > kLog10Cn2Max)
        throw io_error("log10(cn2) outside sane band [-18,-11]");
      if (by_ts.count(t)) ++result.duplicates;
      by_ts[t] = *cn2;
    } catch (const io_error& e) {
      result.rejected.push_back({line, e.what()});
    }
  }
  result.points.reserve(by_ts.size());
  std::int64_t prev = 0;
  bool first = true;
  for (auto& [t, cn2] : by_ts) {
    if (!first && t - prev > 60) result.gaps.push_back({prev + 60, t});
    result.points.push_back({t, cn2});
    prev = t;
    first = false;
  }
  return result;
}

std::size_t MinuteSeries::gap_count() const {
  std::size_t n = 0;
  for (char g : gap) n += (g != 0);
  return n;
}

std::vector<GapSpan> MinuteSeries::gap_spans() const {
  std::vector<GapSpan> spans;
  std::size_t i = 0;
  while (i < gap.size()) {
    if (gap[i]) {
      std::size_t j = i;
      while (j < gap.size() && gap[j]) ++j;
      spans.push_back({minute(i), minute(j - 1) + 60});
      i = j;
    } else {
      ++i;
    }
  }
  return spans;
}

MinuteSeries align_series(const std::vector<SampleRecord>& weather,
                          const std::vector<ScintPoint>& scint,
                          const AlignOptions& opts) {
  if (weather.empty() || scint.empty())
    throw io_error("align_series: empty input series");
  const std::int64_t start = std::max(weather.front().timestamp, scint.front().timestamp);
  const std::int64_t stop = std::min(weather.back().timestamp, scint.back().timestamp);
  if (stop < start) throw io_error("align_series: series do not overlap in time");

  const std::size_t n = static_cast<std::size_t>((stop - start) / 60) + 1;
  MinuteSeries out;
  out.start = start;
  out.records.resize(n);
  out.gap.assign(n, 0);

  // scint lookup
  std::map<std::int64_t, double> cn2_by_ts;
  for (const auto& p : scint) cn2_by_ts[p.timestamp] = p.cn2;

  // per-field forward fill of weather up to the horizon
  struct Held {
    std::optional<double> value;
    std::int64_t since = 0;
  };
  Held h_t, h_sr, h_rh, h_p, h_w, h_s;
  const std::int64_t horizon = static_cast<std::int64_t>(opts.fill_horizon_min) * 60;
  std::size_t wi = 0;

  auto update = [](Held& h, const std::optional<double>& v, std::int64_t t) {
    if (v) {
      h.value = v;
      h.since = t;
    }
  };
  auto held = [&](const Held& h, std::int64_t t) -> std::optional<double> {
    if (h.value && t - h.since <= horizon) return h.value;
    return std::nullopt;
  };

  // consume weather records up to the start so fills can originate before it
  while (wi < weather.size() && weather[wi].timestamp < start) {
    const auto& w = weather[wi];
    update(h_t, w.temperature_c, w.timestamp);
    update(h_sr, w.solar_radiation_kj_m2, w.timestamp);
    update(h_rh, w.relative_humidity_pct, w.timestamp);
    update(h_p, w.pressure_hpa, w.timestamp);
    update(h_w, w.wind_speed_m_s, w.timestamp);
    update(h_s, w.snow_on_ground_cm, w.timestamp);
    ++wi;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t t = out.minute(i);
    while (wi < weather.size() && weather[wi].timestamp <= t) {
      const auto& w = weather[wi];
      update(h_t, w.temperature_c, w.timestamp);
      update(h_sr, w.solar_radiation_kj_m2, w.timestamp);
      update(h_rh, w.relative_humidity_pct, w.timestamp);
      update(h_p, w.pressure_hpa, w.timestamp);
      update(h_w, w.wind_speed_m_s, w.timestamp);
      update(h_s, w.snow_on_ground_cm, w.timestamp);
      ++wi;
    }
    SampleRecord& rec = out.records[i];
    rec.timestamp = t;
    rec.temperature_c = held(h_t, t);
    rec.solar_radiation_kj_m2 = held(h_sr, t);
    rec.relative_humidity_pct = held(h_rh, t);
    rec.pressure_hpa = held(h_p, t);
    rec.wind_speed_m_s = held(h_w, t);
    rec.snow_on_ground_cm = held(h_s, t);
    auto ci = cn2_by_ts.find(t);
    if (ci != cn2_by_ts.end()) rec.log10_cn2 = std::log10(ci->second);
    // Core channels must all be present, otherwise the minute is a gap.
    if (!rec.log10_cn2 || !rec.temperature_c || !rec.solar_radiation_kj_m2 ||
        !rec.relative_humidity_pct)
      out.gap[i] = 1;
  }
  return out;
}

MinuteSeries moving_average_log_cn2(const MinuteSeries& series, const AverageOptions& opts) {
  if (opts.window_min < 2)
    throw config_error("moving average window must span at least 2 samples");
  MinuteSeries out = series;
  const int w = opts.window_min;
  const std::size_t n = series.size();
  // window [i-w+1, i] trailing, or centered on i when requested
  const int lo_off = opts.centered ? -(w / 2) : -(w - 1);
  const int hi_off = opts.centered ? (w - 1) / 2 : 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (series.gap[i]) continue;  // stays a gap
    double sum = 0.0;
    int present = 0, total = 0;
    for (int off = lo_off; off <= hi_off; ++off) {
      const std::int64_t j = static_cast<std::int64_t>(i) + off;
      ++total;
      if (j < 0 || j >= static_cast<std::int64_t>(n)) continue;  // outside counts missing
      if (series.gap[j] || !series.records[j].log10_cn2) continue;
      double v = *series.records[j].log10_cn2;
      sum += opts.linear_domain ? std::pow(10.0, v) : v;
      ++present;
    }
    const double missing = 1.0 - static_cast<double>(present) / total;
    if (present == 0 || missing > opts.gap_tolerance) {
      out.gap[i] = 1;
      out.records[i].log10_cn2 = std::nullopt;
      continue;
    }
    double mean = sum / present;
    out.records[i].log10_cn2 = opts.linear_domain ? std::log10(mean) : mean;
  }
  return out;
}

std::pair<double, double> periodic_time_features(std::int64_t timestamp) {
  const double t = static_cast<double>(seconds_of_day(timestamp));
  const double a = 2.0 * std::numbers::pi * t / 86400.0;
  return {std::cos(a), std::sin(a)};
}

int FeatureSet::log10_cn2_column() const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == "log10_cn2") return static_cast<int>(i);
  throw config_error("feature set lacks log10_cn2");
}

FeatureSet basic_features() {
  return {{"temperature", "solar_radiation", "humidity", "log10_cn2", "t_x", "t_y"}};
}

FeatureSet extended_features() {
  return {{"temperature", "solar_radiation", "humidity", "log10_cn2", "t_x", "t_y",
           "pressure", "wind_speed", "snow_on_ground"}};
}

int NormalizationStats::column(const std::string& name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i)
    if (feature_names[i] == name) return static_cast<int>(i);
  return -1;
}

Eigen::MatrixXd normalize(const Eigen::MatrixXd& features, const NormalizationStats& stats) {
  if (features.cols() != stats.min.size())
    throw numeric_error("normalize: feature count mismatch");
  Eigen::MatrixXd out = features;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double lo = stats.min[c], hi = stats.max[c];
    out.col(c) = (out.col(c).array() - lo) / (hi - lo);
  }
  return out;
}

Eigen::MatrixXd denormalize(const Eigen::MatrixXd& features, const NormalizationStats& stats) {
  if (features.cols() != stats.min.size())
    throw numeric_error("denormalize: feature count mismatch");
  Eigen::MatrixXd out = features;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double lo = stats.min[c], hi = stats.max[c];
    out.col(c) = out.col(c).array() * (hi - lo) + lo;
  }
  return out;
}

Eigen::VectorXd normalize_target(const Eigen::VectorXd& target, const NormalizationStats& stats) {
  const int c = stats.column("log10_cn2");
  if (c < 0) throw numeric_error("stats lack log10_cn2 channel");
  return (target.array() - stats.min[c]) / (stats.max[c] - stats.min[c]);
}

Eigen::VectorXd denormalize_target(const Eigen::VectorXd& target, const NormalizationStats& stats) {
  const int c = stats.column("log10_cn2");
  if (c < 0) throw numeric_error("stats lack log10_cn2 channel");
  return target.array() * (stats.max[c] - stats.min[c]) + stats.min[c];
}

WindowingResult make_windows(const MinuteSeries& series, const FeatureSet& features,
                             const WindowOptions& opts) {
  if (opts.horizon_min % opts.out_res_min != 0)
    throw config_error("output resolution must divide the forecast horizon");
  if (opts.stride_min < 1) throw config_error("stride must be at least one minute");
  WindowingResult result;
  const std::size_t n = series.size();
  const std::size_t span = static_cast<std::size_t>(opts.span_min());
  if (n < span) {
    result.notice = "series shorter than " + std::to_string(opts.span_min()) +
                    " minutes; no windows produced";
    return result;
  }

  // effective gap: source gap or any selected feature missing
  std::vector<char> bad(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (series.gap[i]) {
      bad[i] = 1;
      continue;
    }
    for (const auto& name : features.names) {
      if (name == "t_x" || name == "t_y") continue;
      if (!field_value(series.records[i], name)) {
        bad[i] = 1;
        break;
      }
    }
  }
  // prefix sums for O(1) window checks
  std::vector<std::int32_t> bad_prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    bad_prefix[i + 1] = bad_prefix[i] + bad[i];

  const int F = static_cast<int>(features.names.size());
  const int n_out = opts.n_out();
  for (std::size_t s = 0; s + span <= n; s += static_cast<std::size_t>(opts.stride_min)) {
    if (bad_prefix[s + span] - bad_prefix[s] > 0) continue;  // span crosses a gap
    WindowedExample ex;
    ex.start_timestamp = series.minute(s);
    ex.inputs.resize(opts.in_len, F);
    for (int t = 0; t < opts.in_len; ++t) {
      const SampleRecord& rec = series.records[s + t];
      auto [tx, ty] = periodic_time_features(rec.timestamp);
      for (int f = 0; f < F; ++f) {
        const std::string& name = features.names[f];
        if (name == "t_x")
          ex.inputs(t, f) = tx;
        else if (name == "t_y")
          ex.inputs(t, f) = ty;
        else
          ex.inputs(t, f) = *field_value(rec, name);
      }
    }
    ex.target.resize(n_out);
    const std::size_t input_end = s + opts.in_len - 1;  // last input minute
    for (int k = 0; k < n_out; ++k)
      ex.target[k] = *series.records[input_end + (k + 1) * opts.out_res_min].log10_cn2;
    result.examples.push_back(std::move(ex));
  }
  return result;
}

namespace {

// Drops leading examples of a block that overlap the previous block's end.
void trim_overlap(std::vector<WindowedExample>& block, std::int64_t prev_span_end,
                  int span_min) {
  std::size_t drop = 0;
  while (drop < block.size() && block[drop].start_timestamp < prev_span_end) ++drop;
  block.erase(block.begin(), block.begin() + drop);
  (void)span_min;
}

std::int64_t span_end(const WindowedExample& ex, int span_min) {
  return ex.start_timestamp + static_cast<std::int64_t>(span_min) * 60;
}

}  // namespace

DatasetSplit split_dataset(const std::vector<WindowedExample>& examples,
                           const SplitOptions& opts, const WindowOptions& wopts) {
  for (std::size_t i = 1; i < examples.size(); ++i)
    if (examples[i].start_timestamp <= examples[i - 1].start_timestamp)
      throw numeric_error("split_dataset: examples must be strictly time-ordered");

  DatasetSplit split;
  const int span = wopts.span_min();

  if (opts.mode == SplitOptions::Mode::month) {
    if (opts.month.size() != 7)
      throw config_error("split month must be formatted YYYY-MM");
    std::vector<WindowedExample> rest;
    bool month_seen = false;
    for (const auto& ex : examples) {
      const std::string m_start = utc_month(ex.start_timestamp);
      const std::string m_end = utc_month(span_end(ex, span) - 60);
      if (m_start == opts.month && m_end == opts.month) {
        split.test.push_back(ex);
        month_seen = true;
      } else if (m_start == opts.month || m_end == opts.month) {
        // straddles the excised month boundary: belongs to neither side
        month_seen = true;
      } else {
        rest.push_back(ex);
      }
    }
    if (!month_seen)
      throw config_error("split month " + opts.month + " not present in dataset");
    const std::size_t n_train =
        static_cast<std::size_t>(opts.month_train * static_cast<double>(rest.size()));
    split.train.assign(rest.begin(), rest.begin() + n_train);
    split.validation.assign(rest.begin() + n_train, rest.end());
    if (!split.train.empty())
      trim_overlap(split.validation, span_end(split.train.back(), span), span);
    split.descriptor = "month:" + opts.month + " 85:15";
    return split;
  }

  const double total = opts.train + opts.validation + opts.test;
  if (total <= 0.0) throw config_error("split fractions must be positive");
  const std::size_t n = examples.size();
  std::size_t n_train = static_cast<std::size_t>(opts.train / total * n);
  std::size_t n_val = static_cast<std::size_t>((opts.train + opts.validation) / total * n);
  split.train.assign(examples.begin(), examples.begin() + n_train);
  split.validation.assign(examples.begin() + n_train, examples.begin() + n_val);
  split.test.assign(examples.begin() + n_val, examples.end());
  if (!split.train.empty())
    trim_overlap(split.validation, span_end(split.train.back(), span), span);
  if (!split.validation.empty())
    trim_overlap(split.test, span_end(split.validation.back(), span), span);
  else if (!split.train.empty())
    trim_overlap(split.test, span_end(split.train.back(), span), span);
  split.descriptor = "fractions";
  return split;
}

NormalizationStats compute_stats(const std::vector<WindowedExample>& train,
                                 const FeatureSet& features) {
  if (train.empty()) throw numeric_error("compute_stats: empty training split");
  const int F = static_cast<int>(features.names.size());
  NormalizationStats stats;
  stats.feature_names = features.names;
  stats.min = Eigen::VectorXd::Constant(F, std::numeric_limits<double>::infinity());
  stats.max = Eigen::VectorXd::Constant(F, -std::numeric_limits<double>::infinity());
  const int cn2_col = features.log10_cn2_column();
  for (const auto& ex : train) {
    for (int f = 0; f < F; ++f) {
      stats.min[f] = std::min(stats.min[f], ex.inputs.col(f).minCoeff());
      stats.max[f] = std::max(stats.max[f], ex.inputs.col(f).maxCoeff());
    }
    stats.min[cn2_col] = std::min(stats.min[cn2_col], ex.target.minCoeff());
    stats.max[cn2_col] = std::max(stats.max[cn2_col], ex.target.maxCoeff());
  }
  for (int f = 0; f < F; ++f)
    if (!(stats.max[f] > stats.min[f]))
      throw numeric_error("degenerate feature (constant over training split): " +
                          features.names[f]);
  return stats;
}

NormalizedDataset prepare(const std::vector<WindowedExample>& examples,
                          const NormalizationStats& stats) {
  NormalizedDataset ds;
  ds.inputs.reserve(examples.size());
  ds.targets.reserve(examples.size());
  for (const auto& ex : examples) {
    ds.inputs.push_back(normalize(ex.inputs, stats));
    ds.targets.push_back(normalize_target(ex.target, stats));
    ds.start_timestamps.push_back(ex.start_timestamp);
  }
  return ds;
}

void write_aligned_csv(const std::filesystem::path& path, const MinuteSeries& series,
                       const std::string& meta_comment) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  if (!meta_comment.empty()) out << "# " << meta_comment << "\n";
  out << "timestamp_utc,temperature_c,solar_radiation_kj_m2,relative_humidity_pct,"
         "pressure_hpa,wind_speed_m_s,snow_on_ground_cm,log10_cn2_avg,is_gap\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (std::size_t i = 0; i < series.size(); ++i) {
    const SampleRecord& r = series.records[i];
    out << format_utc(r.timestamp) << ',' << cell(r.temperature_c) << ','
        << cell(r.solar_radiation_kj_m2) << ',' << cell(r.relative_humidity_pct) << ','
        << cell(r.pressure_hpa) << ',' << cell(r.wind_speed_m_s) << ','
        << cell(r.snow_on_ground_cm) << ',' << cell(r.log10_cn2) << ','
        << (series.gap[i] ? 1 : 0) << '\n';
  }
}

MinuteSeries read_aligned_csv(const std::filesystem::path& path) {
  CsvTable table = read_csv(path);
  const char* cols[] = {"timestamp_utc", "temperature_c", "solar_radiation_kj_m2",
                        "relative_humidity_pct", "pressure_hpa", "wind_speed_m_s",
                        "snow_on_ground_cm", "log10_cn2_avg", "is_gap"};
  int idx[9];
  for (int i = 0; i < 9; ++i) {
    idx[i] = table.column(cols[i]);
    if (idx[i] < 0)
      throw io_error(std::string("aligned CSV missing column '") + cols[i] + "'");
  }
  if (table.rows.empty()) throw io_error("aligned CSV has no rows: " + path.string());
  MinuteSeries series;
  series.start = parse_utc(table.rows.front()[idx[0]]);
  series.records.reserve(table.rows.size());
  series.gap.reserve(table.rows.size());
  std::int64_t expect = series.start;
  for (const auto& row : table.rows) {
    SampleRecord rec;
    rec.timestamp = parse_utc(row[idx[0]]);
    if (rec.timestamp != expect)
      throw io_error("aligned CSV is not a contiguous minute grid at " +
                     format_utc(rec.timestamp));
    expect += 60;
    rec.temperature_c = parse_cell(row[idx[1]]);
    rec.solar_radiation_kj_m2 = parse_cell(row[idx[2]]);
    rec.relative_humidity_pct = parse_cell(row[idx[3]]);
    rec.pressure_hpa = parse_cell(row[idx[4]]);
    rec.wind_speed_m_s = parse_cell(row[idx[5]]);
    rec.snow_on_ground_cm = parse_cell(row[idx[6]]);
    rec.log10_cn2 = parse_cell(row[idx[7]]);
    auto g = parse_cell(row[idx[8]]);
    series.records.push_back(rec);
    series.gap.push_back(g && *g != 0.0 ? 1 : 0);
  }
  return series;
}

void write_windows_csv(const std::filesystem::path& path,
                       const std::vector<WindowedExample>& examples,
                       const FeatureSet& features) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << "start_timestamp_utc";
  if (!examples.empty()) {
    const auto& first = examples.front();
    for (int t = 0; t < first.inputs.rows(); ++t)
      for (int f = 0; f < first.inputs.cols(); ++f)
        out << ",in_t" << t << '_' << features.names[f];
    for (int k = 0; k < first.target.size(); ++k) out << ",target_" << k;
  }
  out << '\n';
  for (const auto& ex : examples) {
    out << format_utc(ex.start_timestamp);
    for (int t = 0; t < ex.inputs.rows(); ++t)
      for (int f = 0; f < ex.inputs.cols(); ++f)
        out << ',' << format_double(ex.inputs(t, f));
    for (int k = 0; k < ex.target.size(); ++k) out << ',' << format_double(ex.target[k]);
    out << '\n';
  }
}

}  // namespace turbcast::ts
