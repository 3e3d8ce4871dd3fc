#include "turbcast/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "turbcast/common.hpp"
#include "turbcast/timegrid.hpp"

namespace turbcast::cfg {

namespace {

struct KeySpec {
  const char* key;
  const char* default_value;
};

// the full key schema with module defaults
// Worker-thread counts are deliberately not configuration: parallelism must
// never change results, so execution knobs stay on the command line and out
// of the config hash.
const KeySpec kSchema[] = {
    {"seed", "1"},
    // data pipeline
    {"data.fill_horizon_min", "60"},
    {"data.avg_window_min", "60"},
    {"data.avg_gap_tolerance", "0.25"},
    {"data.avg_centered", "false"},
    {"data.avg_linear_domain", "false"},
    {"data.features", "basic"},
    {"data.in_len_min", "720"},
    {"data.horizon_min", "360"},
    {"data.out_res_min", "15"},
    {"data.stride_min", "15"},
    {"data.split_mode", "fractions"},
    {"data.split_month", ""},
    {"data.split_train", "0.75"},
    {"data.split_val", "0.15"},
    {"data.split_test", "0.10"},
    // training
    {"train.arch", "gru"},
    {"train.hidden", "64,64"},
    {"train.mlp_hidden", "1000,1000"},
    {"train.batch_size", "32"},
    {"train.initial_lr", "1e-4"},
    {"train.patience", "15"},
    {"train.reduction_factor", "0.1"},
    {"train.plateau_threshold", "1e-5"},
    {"train.max_epochs", "200"},
    // prediction
    {"predict.autoregressive", "false"},
    // QKD simulation
    {"qkd.grid_n", "1024"},
    {"qkd.window_m", "1.2"},
    {"qkd.w0_m", "0.08"},
    {"qkd.lambda_m", "810e-9"},
    {"qkd.path_m", "5400"},
    {"qkd.aperture_m", "0.30"},
    {"qkd.dim", "8"},
    {"qkd.j_max", "36"},
    {"qkd.d_eff_m", "0"},
    {"qkd.realizations", "100"},
    {"qkd.levels", "1e-16,2e-16,5e-16,1e-15,1e-14"},
    {"qkd.paired_screens", "true"},
    {"qkd.independent_coeffs", "false"},
    {"qkd.dump_fields", "false"},
    // synthetic data
    {"synth.days", "30"},
    {"synth.start", "2023-07-01T00:00:00Z"},
    {"synth.weather_cadence_min", "1"},
    {"synth.gap_fraction", "0"},
    {"synth.log10_cn2_base", "-16"},
    {"synth.log10_cn2_peak", "-14"},
    {"synth.noise_sigma", "0.08"},
    {"synth.extended", "true"},
};

bool known_key(const std::string& key) {
  for (const auto& spec : kSchema)
    if (key == spec.key) return true;
  return false;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& spec : kSchema) values_[spec.key] = spec.default_value;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  RunConfig config;
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) +
                         " is not key=value: " + text);
    config.set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  return config;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw config_error("unknown config key: " + key);
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw config_error("unknown config key: " + key);
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw config_error("config key " + key + " is not a number: " + v);
  return d;
}

int RunConfig::get_int(const std::string& key) const {
  const double d = get_double(key);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d)
    throw config_error("config key " + key + " is not an integer");
  return i;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw config_error("config key " + key + " is not a boolean: " + v);
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw config_error("config key " + key + " is not an unsigned integer: " + v);
  return static_cast<std::uint64_t>(u);
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  const std::string& v = get(key);
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    char* end = nullptr;
    const double d = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0')
      throw config_error("config key " + key + " has a bad list entry: " + item);
    out.push_back(d);
  }
  if (out.empty()) throw config_error("config key " + key + " is an empty list");
  return out;
}

std::vector<int> RunConfig::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (double d : get_doubles(key)) {
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
      throw config_error("config key " + key + " has a non-integer entry");
    out.push_back(i);
  }
  return out;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::string RunConfig::dump_json() const {
  std::string out = "{";
  bool first = true;
  for (const auto& [k, v] : values_) {
    if (!first) out += ", ";
    first = false;
    out += '"';
    out += k;
    out += "\": \"";
    out += v;
    out += '"';
  }
  out += '}';
  return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(dump()); }

ts::AlignOptions RunConfig::align_options() const {
  ts::AlignOptions opts;
  opts.fill_horizon_min = get_int("data.fill_horizon_min");
  return opts;
}

ts::AverageOptions RunConfig::average_options() const {
  ts::AverageOptions opts;
  opts.window_min = get_int("data.avg_window_min");
  opts.gap_tolerance = get_double("data.avg_gap_tolerance");
  opts.centered = get_bool("data.avg_centered");
  opts.linear_domain = get_bool("data.avg_linear_domain");
  return opts;
}

ts::WindowOptions RunConfig::window_options() const {
  ts::WindowOptions opts;
  opts.in_len = get_int("data.in_len_min");
  opts.horizon_min = get_int("data.horizon_min");
  opts.out_res_min = get_int("data.out_res_min");
  opts.stride_min = get_int("data.stride_min");
  return opts;
}

ts::SplitOptions RunConfig::split_options() const {
  ts::SplitOptions opts;
  const std::string& mode = get("data.split_mode");
  if (mode == "fractions") {
    opts.mode = ts::SplitOptions::Mode::fractions;
  } else if (mode == "month") {
    opts.mode = ts::SplitOptions::Mode::month;
    opts.month = get("data.split_month");
  } else {
    throw config_error("data.split_mode must be 'fractions' or 'month'");
  }
  opts.train = get_double("data.split_train");
  opts.validation = get_double("data.split_val");
  opts.test = get_double("data.split_test");
  return opts;
}

ts::FeatureSet RunConfig::feature_set() const {
  const std::string& f = get("data.features");
  if (f == "basic") return ts::basic_features();
  if (f == "extended") return ts::extended_features();
  throw config_error("data.features must be 'basic' or 'extended'");
}

fc::TrainConfig RunConfig::train_config() const {
  fc::TrainConfig tc;
  tc.batch_size = get_int("train.batch_size");
  tc.initial_lr = get_double("train.initial_lr");
  tc.patience = get_int("train.patience");
  tc.reduction_factor = get_double("train.reduction_factor");
  tc.plateau_threshold = get_double("train.plateau_threshold");
  tc.max_epochs = get_int("train.max_epochs");
  tc.seed = get_u64("seed");
  return tc;
}

qkd::ChannelParams RunConfig::channel_params() const {
  qkd::ChannelParams params;
  params.grid.n = get_int("qkd.grid_n");
  params.grid.window_m = get_double("qkd.window_m");
  params.beam.w0 = get_double("qkd.w0_m");
  params.beam.lambda = get_double("qkd.lambda_m");
  params.beam.path_length = get_double("qkd.path_m");
  params.beam.aperture = get_double("qkd.aperture_m");
  params.d = get_int("qkd.dim");
  params.j_max = get_int("qkd.j_max");
  params.d_eff = get_double("qkd.d_eff_m");
  params.n_realizations = get_int("qkd.realizations");
  params.seed = get_u64("seed");
  params.paired_screens = get_bool("qkd.paired_screens");
  params.independent_coeffs = get_bool("qkd.independent_coeffs");
  return params;
}

synth::SynthConfig RunConfig::synth_config() const {
  synth::SynthConfig sc;
  sc.days = get_int("synth.days");
  sc.start_timestamp = parse_utc(get("synth.start"));
  sc.weather_cadence_min = get_int("synth.weather_cadence_min");
  sc.gap_fraction = get_double("synth.gap_fraction");
  sc.log10_cn2_base = get_double("synth.log10_cn2_base");
  sc.log10_cn2_peak = get_double("synth.log10_cn2_peak");
  sc.noise_sigma = get_double("synth.noise_sigma");
  sc.extended = get_bool("synth.extended");
  sc.seed = get_u64("seed");
  return sc;
}

}  // namespace turbcast::cfg
