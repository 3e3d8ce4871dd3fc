// turbcast: Cn2 forecasting and high-dimensional QKD turbulence simulation.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "turbcast/common.hpp"
#include "turbcast/config.hpp"
#include "turbcast/csv.hpp"
#include "turbcast/forecaster.hpp"
#include "turbcast/importance.hpp"
#include "turbcast/qkd.hpp"
#include "turbcast/synth.hpp"
#include "turbcast/timegrid.hpp"
#include "turbcast/timeseries.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace turbcast;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::int64_t seed = -1;  // -1 = take from config
  int threads = -1;
};

cfg::RunConfig load_config(const GlobalArgs& args) {
  cfg::RunConfig config = args.config_path.empty()
                              ? cfg::RunConfig()
                              : cfg::RunConfig::load(args.config_path);
  if (args.seed >= 0) config.set("seed", std::to_string(args.seed));
  return config;
}

fs::path ensure_out_dir(const GlobalArgs& args) {
  fs::path dir(args.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_meta(const fs::path& dir, const std::string& command,
                const cfg::RunConfig& config) {
  json meta;
  meta["command"] = command;
  meta["config_hash"] = hex_u64(config.hash());
  meta["config"] = json::parse(config.dump_json());
  std::ofstream out(dir / "run_meta.json");
  out << meta.dump(2) << '\n';
}

std::string hash_comment(const cfg::RunConfig& config) {
  return "# config_hash=" + hex_u64(config.hash()) + "\n";
}

ts::MinuteSeries load_dataset(const std::string& path) {
  return ts::read_aligned_csv(path);
}

struct PreparedData {
  ts::FeatureSet features;
  ts::WindowOptions wopts;
  std::vector<ts::WindowedExample> examples;
  ts::DatasetSplit split;
};

PreparedData window_and_split(const cfg::RunConfig& config, const ts::MinuteSeries& series) {
  PreparedData data;
  data.features = config.feature_set();
  data.wopts = config.window_options();
  auto windows = ts::make_windows(series, data.features, data.wopts);
  if (!windows.notice.empty()) std::cerr << "note: " << windows.notice << '\n';
  data.examples = std::move(windows.examples);
  data.split = ts::split_dataset(data.examples, config.split_options(), data.wopts);
  return data;
}

int cmd_synth(const GlobalArgs& gargs) {
  const auto config = load_config(gargs);
  const auto dir = ensure_out_dir(gargs);
  const auto series = synth::generate(config.synth_config());
  synth::write_weather_csv(dir / "weather.csv", series, config.get_bool("synth.extended"));
  synth::write_scint_csv(dir / "scint.csv", series);
  write_meta(dir, "synth", config);
  std::cout << "wrote " << series.weather.size() << " weather rows, "
            << series.scint.size() << " scintillometer rows to " << dir.string() << '\n';
  return 0;
}

int cmd_ingest(const GlobalArgs& gargs, const std::string& weather_path,
               const std::string& scint_path, bool export_windows) {
  const auto config = load_config(gargs);
  const auto dir = ensure_out_dir(gargs);
  const auto weather = ts::ingest_weather_csv(weather_path);
  const auto scint = ts::ingest_scintillometer_csv(scint_path);
  for (const auto& issue : weather.rejected)
    std::cerr << "weather line " << issue.line << " rejected: " << issue.reason << '\n';
  for (const auto& issue : scint.rejected)
    std::cerr << "scint line " << issue.line << " rejected: " << issue.reason << '\n';

  auto aligned = ts::align_series(weather.records, scint.points, config.align_options());
  aligned = ts::moving_average_log_cn2(aligned, config.average_options());
  ts::write_aligned_csv(dir / "aligned.csv", aligned,
                        "config_hash=" + hex_u64(config.hash()));

  {
    std::ofstream gaps(dir / "gaps.csv");
    gaps << hash_comment(config) << "gap_start_utc,gap_end_utc,minutes\n";
    for (const auto& span : aligned.gap_spans())
      gaps << format_utc(span.start) << ',' << format_utc(span.end) << ','
           << span.minutes() << '\n';
  }
  if (export_windows) {
    const auto features = config.feature_set();
    const auto windows = ts::make_windows(aligned, features, config.window_options());
    ts::write_windows_csv(dir / "windows.csv", windows.examples, features);
  }
  write_meta(dir, "ingest", config);
  std::cout << "aligned " << aligned.size() << " minutes (" << aligned.gap_count()
            << " gap minutes, " << weather.duplicates + scint.duplicates
            << " duplicate rows collapsed, " << weather.rejected.size() + scint.rejected.size()
            << " rows rejected)\n";
  return 0;
}

int cmd_train(const GlobalArgs& gargs, const std::string& dataset_path,
              const std::string& model_out) {
  const auto config = load_config(gargs);
  const auto dir = ensure_out_dir(gargs);
  const auto series = load_dataset(dataset_path);
  auto data = window_and_split(config, series);
  if (data.split.train.empty()) throw config_error("training split is empty");

  const auto stats = ts::compute_stats(data.split.train, data.features);
  const auto train_set = ts::prepare(data.split.train, stats);
  const auto val_set = ts::prepare(data.split.validation, stats);

  const auto tc = config.train_config();
  const int F = static_cast<int>(data.features.names.size());
  std::unique_ptr<fc::ForecastNet> net;
  if (config.get("train.arch") == "gru") {
    net = std::make_unique<fc::GruForecaster>(F, config.get_ints("train.hidden"),
                                              data.wopts.n_out(), tc.seed);
  } else if (config.get("train.arch") == "mlp") {
    net = std::make_unique<fc::MlpBaseline>(F, data.wopts.in_len,
                                            config.get_ints("train.mlp_hidden"),
                                            data.wopts.n_out(), tc.seed);
  } else {
    throw config_error("train.arch must be 'gru' or 'mlp'");
  }

  const auto history = fc::train(*net, train_set, val_set, tc);

  fc::ForecastModel model;
  model.net = std::move(net);
  model.stats = stats;
  model.in_len = data.wopts.in_len;
  model.out_res_min = data.wopts.out_res_min;
  model.seed = tc.seed;
  model.config_hash = config.hash();
  fc::save_checkpoint(model_out.empty() ? (dir / "model.ckpt").string() : model_out, model);

  {
    std::ofstream out(dir / "history.csv");
    out << hash_comment(config) << "epoch,train_mse,val_mse,lr\n";
    for (const auto& e : history.epochs)
      out << e.epoch << ',' << format_double(e.train_mse) << ','
          << format_double(e.val_mse) << ',' << format_double(e.lr) << '\n';
  }
  write_meta(dir, "train", config);
  std::cout << "trained " << config.get("train.arch") << " for "
            << history.epochs.size() << " epochs; best val MSE "
            << format_double(history.best_val) << " at epoch " << history.best_epoch
            << '\n';
  return 0;
}

int cmd_predict(const GlobalArgs& gargs, const std::string& model_path,
                const std::string& dataset_path, const std::string& start,
                int horizon_hours) {
  const auto config = load_config(gargs);
  const auto dir = ensure_out_dir(gargs);
  const auto model = fc::load_checkpoint(model_path);
  const auto series = load_dataset(dataset_path);
  const ts::FeatureSet features{model.stats.feature_names};
  const auto points =
      fc::predict_cascade(model, series, parse_utc(start), horizon_hours, features,
                          config.get_bool("predict.autoregressive"));

  std::ofstream out(dir / "forecast.csv");
  out << hash_comment(config)
      << "timestamp_utc,log10_cn2_pred,log10_cn2_true,rmse_window\n";
  for (const auto& p : points) {
    out << format_utc(p.timestamp) << ',' << format_double(p.log10_cn2_pred) << ',';
    if (p.log10_cn2_true) out << format_double(*p.log10_cn2_true);
    out << ',' << format_double(p.window_rmse) << '\n';
  }
  write_meta(dir, "predict", config);
  std::cout << "wrote " << points.size() << " forecast points\n";
  return 0;
}

int cmd_evaluate(const GlobalArgs& gargs, const std::string& model_path,
                 const std::string& dataset_path, const std::string& split_name) {
  const auto config = load_config(gargs);
  const auto dir = ensure_out_dir(gargs);
  const auto model = fc::load_checkpoint(model_path);
  const auto series = load_dataset(dataset_path);
  auto data = window_and_split(config, series);

  const std::vector<ts::WindowedExample>* subset = nullptr;
  if (split_name == "train") subset = &data.split.train;
  else if (split_name == "validation") subset = &data.split.validation;
  else if (split_name == "test") subset = &data.split.test;
  else throw config_error("split must be train, validation or test");
  if (subset->empty()) throw config_error("selected split is empty");

  const auto prepared = ts::prepare(*subset, model.stats);
  const auto report = fc::evaluate(*model.net, prepared);

  {
    std::ofstream out(dir / "eval_summary.csv");
    out << hash_comment(config) << "metric,value\n";
    out << "examples," << prepared.size() << '\n';
    out << "mean_rmse," << format_double(report.mean_rmse) << '\n';
    out << "delta," << format_double(report.delta) << '\n';
  }
  {
    std::ofstream out(dir / "eval_profile.csv");
    out << hash_comment(config) << "step_min,rmse\n";
    for (int k = 0; k < report.per_step_rmse.size(); ++k)
      out << (k + 1) * model.out_res_min << ','
          << format_double(report.per_step_rmse[k]) << '\n';
  }
  write_meta(dir, "evaluate", config);
  std::cout << "split " << split_name << ": mean RMSE " << format_double(report.mean_rmse)
            << " (delta " << format_double(report.delta) << ") over " << prepared.size()
            << " examples\n";
  return 0;
}

int cmd_pfi(const GlobalArgs& gargs, const std::string& model_path,
            const std::string& dataset_path, int repeats, int subset) {
  const auto config = load_config(gargs);
  const auto dir = ensure_out_dir(gargs);
  const auto model = fc::load_checkpoint(model_path);
  const auto series = load_dataset(dataset_path);
  const ts::FeatureSet features{model.stats.feature_names};
  const auto windows = ts::make_windows(series, features, config.window_options());
  const auto prepared = ts::prepare(windows.examples, model.stats);

  const auto groups = imp::default_groups(model.stats.feature_names);
  const auto report = imp::feature_importance(*model.net, prepared, groups, repeats,
                                              subset, config.get_u64("seed"));
  if (!report.notice.empty()) std::cerr << "note: " << report.notice << '\n';

  std::ofstream out(dir / "importance.csv");
  out << hash_comment(config) << "feature_or_group,importance_mean,importance_std,repeats\n";
  for (const auto& e : report.entries)
    out << e.name << ',' << format_double(e.mean) << ',' << format_double(e.stddev)
        << ',' << e.repeats << '\n';
  write_meta(dir, "pfi", config);
  std::cout << "feature importance over " << report.subset_size << " examples, baseline RMSE "
            << format_double(report.baseline_rmse) << '\n';
  return 0;
}

int cmd_qkd(const GlobalArgs& gargs, bool dump_fields_flag) {
  const auto config = load_config(gargs);
  const auto dir = ensure_out_dir(gargs);
  auto params = config.channel_params();
  if (gargs.threads > 0) params.threads = gargs.threads;
  const auto levels = config.get_doubles("qkd.levels");
  const bool dump_fields = dump_fields_flag || config.get_bool("qkd.dump_fields");

  qkd::ChannelSimulator sim(params);
  const double threshold = qkd::security_threshold(params.d);

  std::ofstream report(dir / "qkd_report.csv");
  report << hash_comment(config) << "cn2,basis,qder_pct,bits_per_photon,secure\n";

  for (std::size_t idx = 0; idx < levels.size(); ++idx) {
    const auto result = sim.run(levels[idx], static_cast<int>(idx));
    for (const auto basis_tag : {op::ModeLabel::Basis::oam, op::ModeLabel::Basis::angle}) {
      const auto& basis = result.basis(basis_tag);
      const std::string basis_name =
          basis_tag == op::ModeLabel::Basis::oam ? "OAM" : "ANGLE";
      const double bp = std::max(0.0, qkd::key_rate(params.d, basis.qder));
      report << format_double(levels[idx]) << ',' << basis_name << ','
             << format_double(basis.qder * 100.0) << ',' << format_double(bp) << ','
             << (basis.qder < threshold ? 1 : 0) << '\n';

      const std::string stem = "crosstalk_" + format_double(levels[idx]) + "_" + basis_name;
      {
        std::ofstream mat(dir / (stem + ".csv"));
        mat << hash_comment(config);
        for (int r = 0; r < params.d; ++r) {
          for (int c = 0; c < params.d; ++c)
            mat << (c ? "," : "") << format_double(basis.crosstalk(r, c));
          mat << '\n';
        }
      }
      {
        json side;
        side["cn2"] = levels[idx];
        side["basis"] = basis_name;
        side["d"] = params.d;
        side["n_realizations"] = result.n_realizations;
        side["seed"] = params.seed;
        side["grid_n"] = params.grid.n;
        side["window_m"] = params.grid.window_m;
        side["w0_m"] = params.beam.w0;
        side["lambda_m"] = params.beam.lambda;
        side["path_m"] = params.beam.path_length;
        side["aperture_m"] = params.beam.aperture;
        side["j_max"] = params.j_max;
        side["d_eff_m"] = params.effective_d_eff();
        side["qder"] = basis.qder;
        side["worst_realization"] = basis.worst_index;
        side["config_hash"] = hex_u64(config.hash());
        std::vector<double> sums(basis.row_sums.data(),
                                 basis.row_sums.data() + basis.row_sums.size());
        side["post_selection_row_sums"] = sums;
        std::ofstream js(dir / (stem + ".json"));
        js << side.dump(2) << '\n';
      }
      // worst-realization screen coefficients (j, a_j)
      {
        Rng rng(result.screen_seeds[basis.worst_index]);
        const double r0 =
            turb::fried_r0(levels[idx], params.beam.lambda, params.beam.path_length);
        const auto spectrum = turb::make_spectrum(params.j_max, params.effective_d_eff(),
                                                  params.independent_coeffs);
        const auto coeffs = spectrum.sample(spectrum.amplitude_scale(r0), rng);
        std::ofstream sc(dir / ("worst_screen_" + format_double(levels[idx]) + "_" +
                                basis_name + ".csv"));
        sc << hash_comment(config) << "j,a_j_rad\n";
        for (int j = 0; j < coeffs.size(); ++j)
          sc << (j + 2) << ',' << format_double(coeffs[j]) << '\n';
      }
      if (dump_fields) {
        const auto fields = sim.realization_fields(levels[idx], static_cast<int>(idx),
                                                   basis.worst_index, basis_tag);
        for (std::size_t m = 0; m < fields.size(); ++m) {
          const std::string name = "worst_field_" + format_double(levels[idx]) + "_" +
                                   basis_name + "_mode" + std::to_string(m) + ".bin";
          op::dump_field(dir / name, fields[m],
                         "  \"basis\": \"" + basis_name + "\",\n  \"mode\": " +
                             std::to_string(m) +
                             ",\n  \"cn2\": " + format_double(levels[idx]));
        }
      }
    }
  }
  write_meta(dir, "qkd", config);
  std::cout << "wrote QKD report for " << levels.size() << " turbulence levels to "
            << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cn2 forecasting and high-dimensional QKD turbulence simulation"};
  app.require_subcommand(1);

  GlobalArgs gargs;
  app.add_option("--config", gargs.config_path, "key=value configuration file");
  app.add_option("--seed", gargs.seed, "override the configured seed");
  app.add_option("--out-dir", gargs.out_dir, "output directory");
  app.add_option("--threads", gargs.threads, "override worker thread count");

  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic weather + Cn2 CSVs");

  std::string weather_path, scint_path;
  bool export_windows = false;
  auto* ingest_cmd = app.add_subcommand("ingest", "align weather and scintillometer CSVs");
  ingest_cmd->add_option("--weather", weather_path, "weather CSV")->required();
  ingest_cmd->add_option("--scint", scint_path, "scintillometer CSV")->required();
  ingest_cmd->add_flag("--export-windows", export_windows, "also write flattened windows");

  std::string dataset_path, model_path, model_out, start, split_name = "test";
  int horizon_hours = 6, repeats = 3, subset = 1000;
  bool dump_fields = false;

  auto* train_cmd = app.add_subcommand("train", "train the forecaster");
  train_cmd->add_option("--dataset", dataset_path, "aligned.csv from ingest")->required();
  train_cmd->add_option("--model-out", model_out, "checkpoint path (default out-dir/model.ckpt)");

  auto* predict_cmd = app.add_subcommand("predict", "cascaded Cn2 forecast");
  predict_cmd->add_option("--model", model_path, "checkpoint")->required();
  predict_cmd->add_option("--dataset", dataset_path, "aligned.csv")->required();
  predict_cmd->add_option("--start", start, "last observed minute (ISO-8601 UTC)")->required();
  predict_cmd->add_option("--horizon-hours", horizon_hours, "forecast span");

  auto* eval_cmd = app.add_subcommand("evaluate", "RMSE/delta report on a split");
  eval_cmd->add_option("--model", model_path, "checkpoint")->required();
  eval_cmd->add_option("--dataset", dataset_path, "aligned.csv")->required();
  eval_cmd->add_option("--split", split_name, "train|validation|test");

  auto* pfi_cmd = app.add_subcommand("pfi", "permutation feature importance");
  pfi_cmd->add_option("--model", model_path, "checkpoint")->required();
  pfi_cmd->add_option("--dataset", dataset_path, "aligned.csv")->required();
  pfi_cmd->add_option("--repeats", repeats, "permutations per feature");
  pfi_cmd->add_option("--subset", subset, "leading examples evaluated");

  auto* qkd_cmd = app.add_subcommand("qkd", "turbulent-channel QKD simulation");
  qkd_cmd->add_flag("--dump-fields", dump_fields, "export worst-case aberrated fields");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return cmd_synth(gargs);
    if (ingest_cmd->parsed()) return cmd_ingest(gargs, weather_path, scint_path, export_windows);
    if (train_cmd->parsed()) return cmd_train(gargs, dataset_path, model_out);
    if (predict_cmd->parsed())
      return cmd_predict(gargs, model_path, dataset_path, start, horizon_hours);
    if (eval_cmd->parsed()) return cmd_evaluate(gargs, model_path, dataset_path, split_name);
    if (pfi_cmd->parsed()) return cmd_pfi(gargs, model_path, dataset_path, repeats, subset);
    if (qkd_cmd->parsed()) return cmd_qkd(gargs, dump_fields);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const io_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
