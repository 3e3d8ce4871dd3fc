#include "turbcast/importance.hpp"

#include <algorithm>
#include <cmath>

#include "turbcast/common.hpp"

namespace turbcast::imp {

std::vector<FeatureGroup> default_groups(const std::vector<std::string>& names) {
  std::vector<FeatureGroup> groups;
  int tx = -1, ty = -1;
  auto column = [&](const std::string& n) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == n) return static_cast<int>(i);
    return -1;
  };
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "t_x") {
      tx = static_cast<int>(i);
      continue;
    }
    if (names[i] == "t_y") {
      ty = static_cast<int>(i);
      continue;
    }
    groups.push_back({names[i], {static_cast<int>(i)}});
  }
  if (tx >= 0 && ty >= 0) groups.push_back({"time", {tx, ty}});
  // correlated meteorological features are additionally permuted together
  const int p = column("pressure"), t = column("temperature"), h = column("humidity"),
            w = column("wind_speed");
  if (p >= 0 && t >= 0 && h >= 0 && w >= 0)
    groups.push_back({"pressure+temperature+humidity+wind_speed", {p, t, h, w}});
  return groups;
}

ts::NormalizedDataset permute_feature(const ts::NormalizedDataset& data,
                                      const FeatureGroup& group, std::uint64_t seed) {
  if (group.columns.empty()) throw config_error("permute_feature: empty group");
  for (int c : group.columns)
    if (c < 0 || data.inputs.empty() || c >= data.inputs.front().cols())
      throw config_error("permute_feature: unknown feature column in group '" +
                         group.name + "'");
  Rng rng(seed);
  const std::vector<std::size_t> perm = rng.permutation(data.size());
  ts::NormalizedDataset out = data;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (int c : group.columns) out.inputs[i].col(c) = data.inputs[perm[i]].col(c);
  return out;
}

ImportanceReport feature_importance(const fc::ForecastNet& net,
                                    const ts::NormalizedDataset& data,
                                    const std::vector<FeatureGroup>& groups, int repeats,
                                    int subset, std::uint64_t seed) {
  if (repeats < 1) throw config_error("feature_importance: repeats must be positive");
  if (data.size() == 0) throw numeric_error("feature_importance: empty dataset");

  ImportanceReport report;
  ts::NormalizedDataset eval_set;
  const std::size_t use = std::min<std::size_t>(subset, data.size());
  if (use < static_cast<std::size_t>(subset))
    report.notice = "subset truncated to " + std::to_string(use) + " examples";
  eval_set.inputs.assign(data.inputs.begin(), data.inputs.begin() + use);
  eval_set.targets.assign(data.targets.begin(), data.targets.begin() + use);
  report.subset_size = static_cast<int>(use);

  report.baseline_rmse = fc::evaluate(net, eval_set).mean_rmse;
  if (report.baseline_rmse <= 0.0)
    throw numeric_error("feature_importance: zero baseline error, ratio undefined");

  for (const auto& group : groups) {
    ImportanceEntry entry;
    entry.name = group.name;
    entry.repeats = repeats;
    std::vector<double> ratios;
    for (int r = 0; r < repeats; ++r) {
      const auto corrupted = permute_feature(eval_set, group, seed + static_cast<std::uint64_t>(r));
      ratios.push_back(fc::evaluate(net, corrupted).mean_rmse / report.baseline_rmse);
    }
    double mean = 0;
    for (double v : ratios) mean += v;
    mean /= ratios.size();
    double var = 0;
    for (double v : ratios) var += (v - mean) * (v - mean);
    entry.mean = mean;
    entry.stddev = ratios.size() > 1 ? std::sqrt(var / (ratios.size() - 1)) : 0.0;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace turbcast::imp
