#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbcast/forecaster.hpp"
#include "turbcast/timeseries.hpp"

namespace turbcast::imp {

// A named set of feature columns permuted together (singleton for plain
// per-feature importance).
struct FeatureGroup {
  std::string name;
  std::vector<int> columns;
};

// Default grouping for a trained model: every feature on its own except the
// time pair (t_x, t_y), plus the correlated meteorological group when the
// model carries the extended features.
std::vector<FeatureGroup> default_groups(const std::vector<std::string>& feature_names);

// Shuffles the group's columns across examples with one shared permutation;
// whole 720-step columns move together so within-window structure survives.
ts::NormalizedDataset permute_feature(const ts::NormalizedDataset& data,
                                      const FeatureGroup& group, std::uint64_t seed);

struct ImportanceEntry {
  std::string name;
  double mean = 0;
  double stddev = 0;
  int repeats = 0;
};

struct ImportanceReport {
  std::vector<ImportanceEntry> entries;
  double baseline_rmse = 0;
  int subset_size = 0;
  std::string notice;  // set when the requested subset exceeded the dataset
};

// I = eps_perm / eps_orig with eps the mean normalized RMSE of
// fc::evaluate; mean and std over `repeats` permutations seeded seed+i.
ImportanceReport feature_importance(const fc::ForecastNet& net,
                                    const ts::NormalizedDataset& data,
                                    const std::vector<FeatureGroup>& groups,
                                    int repeats = 3, int subset = 1000,
                                    std::uint64_t seed = 1);

}  // namespace turbcast::imp
