#pragma once

#include <cstdint>
#include <filesystem>

#include "turbcast/timeseries.hpp"

namespace turbcast::synth {

// Synthetic stand-in for the measurement campaign: a diurnal log10 Cn2 cycle
// (afternoon peak, evening drop, secondary overnight peak) plus correlated
// weather channels and optional outages.
struct SynthConfig {
  int days = 30;
  std::int64_t start_timestamp = 1688169600;  // 2023-07-01T00:00:00Z
  int weather_cadence_min = 1;
  double gap_fraction = 0.0;           // fraction of scint minutes knocked out
  double log10_cn2_base = -16.0;       // evening floor
  double log10_cn2_peak = -14.0;       // afternoon peak
  double noise_sigma = 0.08;           // AR(1) noise on log10 Cn2
  bool extended = true;                // emit pressure/wind/snow columns
  std::uint64_t seed = 1;
};

struct SynthSeries {
  std::vector<ts::SampleRecord> weather;
  std::vector<ts::ScintPoint> scint;
};

SynthSeries generate(const SynthConfig& config);

// Diurnal template without noise; exposed for tests.
double diurnal_log10_cn2(double hour_of_day, const SynthConfig& config);

void write_weather_csv(const std::filesystem::path& path, const SynthSeries& series,
                       bool extended);
void write_scint_csv(const std::filesystem::path& path, const SynthSeries& series);

}  // namespace turbcast::synth
