#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "turbcast/forecaster.hpp"
#include "turbcast/qkd.hpp"
#include "turbcast/synth.hpp"
#include "turbcast/timeseries.hpp"

namespace turbcast::cfg {

// Plain-text key=value configuration ('#' comments). Every module default is
// a key here; unknown keys are rejected. The effective configuration (with
// defaults applied) is hashed and echoed into every output's metadata.
class RunConfig {
 public:
  RunConfig();  // defaults only

  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);  // validates key
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;  // comma list
  std::vector<int> get_ints(const std::string& key) const;

  std::uint64_t hash() const;   // FNV-1a over sorted key=value lines
  std::string dump() const;     // canonical text form
  std::string dump_json() const;

  // typed option bundles
  ts::AlignOptions align_options() const;
  ts::AverageOptions average_options() const;
  ts::WindowOptions window_options() const;
  ts::SplitOptions split_options() const;
  ts::FeatureSet feature_set() const;
  fc::TrainConfig train_config() const;
  qkd::ChannelParams channel_params() const;
  synth::SynthConfig synth_config() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace turbcast::cfg
