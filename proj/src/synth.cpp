#include "turbcast/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "turbcast/common.hpp"
#include "turbcast/csv.hpp"
#include "turbcast/timegrid.hpp"

namespace turbcast::synth {

namespace {

double wrapped_bump(double hour, double center, double width) {
  double d = std::fabs(hour - center);
  d = std::min(d, 24.0 - d);
  return std::exp(-0.5 * (d / width) * (d / width));
}

}  // namespace

double diurnal_log10_cn2(double hour, const SynthConfig& cfg) {
  // afternoon maximum and a slightly weaker overnight peak; evenings fall
  // toward the base level
  const double afternoon = wrapped_bump(hour, 14.0, 2.5);
  const double overnight = 0.92 * wrapped_bump(hour, 2.0, 2.0);
  return cfg.log10_cn2_base +
         (cfg.log10_cn2_peak - cfg.log10_cn2_base) * std::max(afternoon, overnight);
}

SynthSeries generate(const SynthConfig& cfg) {
  if (cfg.days < 1) throw config_error("synth: days must be positive");
  if (cfg.weather_cadence_min < 1) throw config_error("synth: weather cadence must be positive");
  if (cfg.gap_fraction < 0.0 || cfg.gap_fraction >= 1.0)
    throw config_error("synth: gap fraction must lie in [0,1)");

  const int n = cfg.days * 1440;
  Rng rng(cfg.seed);
  SynthSeries out;
  out.weather.reserve(n / cfg.weather_cadence_min + 1);
  out.scint.reserve(n);

  // AR(1) noise processes; time constants in minutes
  const double phi_cn2 = std::exp(-1.0 / 180.0);
  const double phi_met = std::exp(-1.0 / 360.0);
  double noise_cn2 = 0.0, noise_t = 0.0, noise_h = 0.0, noise_p = 0.0, noise_w = 0.0;
  const double day_jitter_sigma = 0.06;
  double day_offset = 0.0;

  // outage plan: contiguous spans totalling roughly gap_fraction of the series
  std::vector<char> outage(n, 0);
  if (cfg.gap_fraction > 0.0) {
    int budget = static_cast<int>(cfg.gap_fraction * n);
    while (budget > 0) {
      const int len = 30 + static_cast<int>(rng.uniform_index(151));  // 30..180 min
      const int start = static_cast<int>(rng.uniform_index(n));
      for (int i = start; i < std::min(n, start + len) && budget > 0; ++i) {
        if (!outage[i]) {
          outage[i] = 1;
          --budget;
        }
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    const std::int64_t t = cfg.start_timestamp + static_cast<std::int64_t>(i) * 60;
    const double hour = seconds_of_day(t) / 3600.0;
    if (i % 1440 == 0) day_offset = day_jitter_sigma * rng.gaussian();

    noise_cn2 = phi_cn2 * noise_cn2 +
                cfg.noise_sigma * std::sqrt(1.0 - phi_cn2 * phi_cn2) * rng.gaussian();
    noise_t = phi_met * noise_t + 0.6 * std::sqrt(1.0 - phi_met * phi_met) * rng.gaussian();
    noise_h = phi_met * noise_h + 3.0 * std::sqrt(1.0 - phi_met * phi_met) * rng.gaussian();
    noise_p = phi_met * noise_p + 1.5 * std::sqrt(1.0 - phi_met * phi_met) * rng.gaussian();
    noise_w = phi_met * noise_w + 0.8 * std::sqrt(1.0 - phi_met * phi_met) * rng.gaussian();

    const double lg = diurnal_log10_cn2(hour, cfg) + noise_cn2 + day_offset;
    if (!outage[i]) out.scint.push_back({t, std::pow(10.0, lg)});

    if (i % cfg.weather_cadence_min == 0) {
      ts::SampleRecord rec;
      rec.timestamp = t;
      const double diurnal = std::sin(2.0 * std::numbers::pi * (hour - 9.0) / 24.0);
      rec.temperature_c = 17.0 + 8.0 * diurnal + noise_t;
      const double sun = std::sin(std::numbers::pi * (hour - 6.0) / 14.0);
      rec.solar_radiation_kj_m2 = (hour >= 6.0 && hour <= 20.0 && sun > 0.0)
                                      ? 3000.0 * sun * sun
                                      : 0.0;
      rec.relative_humidity_pct =
          std::clamp(62.0 - 18.0 * diurnal + noise_h, 5.0, 100.0);
      if (cfg.extended) {
        rec.pressure_hpa = 1013.0 + noise_p;
        rec.wind_speed_m_s = std::fabs(2.0 + noise_w);
        rec.snow_on_ground_cm = 0.0;
      }
      out.weather.push_back(rec);
    }
  }
  return out;
}

void write_weather_csv(const std::filesystem::path& path, const SynthSeries& series,
                       bool extended) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << "timestamp_utc,temperature_c,solar_radiation_kj_m2,relative_humidity_pct";
  if (extended) out << ",pressure_hpa,wind_speed_m_s,snow_on_ground_cm";
  out << '\n';
  for (const auto& r : series.weather) {
    out << format_utc(r.timestamp) << ',' << format_double(*r.temperature_c) << ','
        << format_double(*r.solar_radiation_kj_m2) << ','
        << format_double(*r.relative_humidity_pct);
    if (extended)
      out << ',' << format_double(r.pressure_hpa.value_or(0)) << ','
          << format_double(r.wind_speed_m_s.value_or(0)) << ','
          << format_double(r.snow_on_ground_cm.value_or(0));
    out << '\n';
  }
}

void write_scint_csv(const std::filesystem::path& path, const SynthSeries& series) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << "timestamp_utc,cn2_m_minus_2_3\n";
  char buf[40];
  for (const auto& p : series.scint) {
    std::snprintf(buf, sizeof(buf), "%.9e", p.cn2);
    out << format_utc(p.timestamp) << ',' << buf << '\n';
  }
}

}  // namespace turbcast::synth
