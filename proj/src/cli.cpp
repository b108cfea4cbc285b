#include "detcal/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace detcal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json num_or_null(double v) { return std::isnan(v) ? json() : json(v); }

double num_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json curve_to_json(const metrics::CalibrationCurve& curve) {
  json c;
  c["variant"] = metrics::to_string(curve.variant);
  c["num_bins"] = curve.num_bins;
  c["classes"] = json::array();
  for (const auto& bins : curve.per_class) {
    json row = json::array();
    for (const auto& s : bins) {
      row.push_back({{"bin", s.bin_index},
                     {"count", s.count},
                     {"mean_prob", s.mean_prob},
                     {"accuracy", s.accuracy}});
    }
    c["classes"].push_back(std::move(row));
  }
  c["quartile_band"] = json::array();
  for (const auto& q : curve.quartile_band) {
    c["quartile_band"].push_back(
        {{"defined", q.defined}, {"q25", q.q25}, {"q50", q.q50}, {"q75", q.q75}});
  }
  return c;
}

const char* gt_format_name(ingest::GtFormat f) {
  return f == ingest::GtFormat::CocoJson ? "coco" : "native";
}

const char* pred_kind_name(ingest::PredKind k) {
  switch (k) {
    case ingest::PredKind::Probs: return "probs";
    case ingest::PredKind::Logits: return "logits";
    case ingest::PredKind::FromFile: break;
  }
  return "file";
}

json config_echo(const RunConfig& cfg, const char* command) {
  json doc;
  doc["command"] = command;
  doc["gt"] = cfg.gt_path;
  doc["pred"] = cfg.pred_path;
  doc["out"] = cfg.out_dir;
  doc["gt_format"] = gt_format_name(cfg.gt_format);
  doc["pred_kind"] = pred_kind_name(cfg.pred_kind);
  doc["postprocess"] = {{"enabled", cfg.post.enabled},
                        {"score_threshold", cfg.post.score_threshold},
                        {"nms_iou_threshold", cfg.post.nms_iou_threshold},
                        {"top_k", cfg.post.top_k}};
  doc["matching"] = {
      {"mode", cfg.match.mode == matching::MatchMode::OneToOne ? "one2one" : "many2one"},
      {"iou_threshold", cfg.match.iou_threshold}};
  doc["bins"] = cfg.bins.num_bins;
  doc["entropy_bins"] = cfg.entropy_bins;
  doc["label"] = cfg.label;
  doc["recal_skip_missing"] = cfg.recal_skip_missing;
  return doc;
}

std::string summary_value(double v) {
  if (std::isnan(v)) return "n/a";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct LoadedRun {
  ingest::Dataset dataset;
  ingest::PredictionDump processed;
  EvaluationSet set;
};

LoadedRun load_and_build(const RunConfig& cfg) {
  LoadedRun run;
  run.dataset = ingest::load_ground_truth(cfg.gt_path, cfg.gt_format);
  const ingest::PredictionDump raw =
      ingest::load_predictions(cfg.pred_path, run.dataset.num_classes(), cfg.pred_kind);
  run.processed = postprocess::run_pipeline(raw, cfg.post);
  run.set = matching::build_evaluation_set(run.dataset, run.processed, cfg.match);
  if (run.set.empty()) {
    throw Error(ErrorKind::EmptyEvaluationSet, "pipeline produced no evaluation records");
  }
  return run;
}

}  // namespace

void RunConfig::validate() const {
  if (gt_path.empty() || pred_path.empty()) {
    throw Error(ErrorKind::InvalidConfig, "gt and pred paths are required");
  }
  if (out_dir.empty()) {
    throw Error(ErrorKind::InvalidConfig, "out directory is required");
  }
  if (entropy_bins < 1) {
    throw Error(ErrorKind::InvalidConfig, "entropy_bins must be >= 1");
  }
  post.validate();
  match.validate();
  bins.validate();
}

std::string report_to_json(const report::RunArtifact& artifact, const RunConfig& cfg) {
  const metrics::MetricsReport& r = artifact.report;
  json doc;
  doc["label"] = artifact.label;
  doc["num_classes"] = r.num_classes;
  doc["metrics"] = {{"nll", r.nll},           {"brier", r.brier},
                    {"tce", r.tce},           {"mce", r.mce},
                    {"dtce", num_or_null(r.dtce)}, {"dmce", num_or_null(r.dmce)},
                    {"ap50", num_or_null(r.ap50)}};
  doc["counts"] = {{"matched", r.counts.matched},
                   {"unmatched_pred", r.counts.unmatched_pred},
                   {"missing_gt", r.counts.missing_gt}};
  doc["entropy_histogram"] = {
      {"lo", r.entropy_hist.lo}, {"hi", r.entropy_hist.hi}, {"counts", r.entropy_hist.counts}};
  doc["curves"] = json::array();
  for (const auto& curve : r.curves) doc["curves"].push_back(curve_to_json(curve));
  doc["config"] = config_echo(cfg, "evaluate");
  return doc.dump(2) + "\n";
}

void run_evaluate(const RunConfig& cfg) {
  cfg.validate();
  const LoadedRun run = load_and_build(cfg);
  const metrics::MetricsReport rep =
      metrics::compute_report(run.dataset, run.processed, run.set, cfg.bins, cfg.entropy_bins);

  fs::create_directories(cfg.out_dir);
  const report::RunArtifact artifact{cfg.label, rep};
  report::write_file(cfg.out_dir + "/report.json", report_to_json(artifact, cfg));
  report::write_file(cfg.out_dir + "/curves.csv", metrics::curves_to_csv(rep.curves));
  report::write_file(cfg.out_dir + "/entropy_hist.csv",
                     metrics::histogram_to_csv(rep.entropy_hist));
  for (const auto& curve : rep.curves) {
    report::write_file(cfg.out_dir + "/plot_" + metrics::to_string(curve.variant) + ".svg",
                       report::render_calibration_svg(curve, run.dataset.class_names));
  }
  if (!cfg.match_debug_path.empty()) {
    report::write_file(cfg.match_debug_path,
                       matching::match_debug_json_lines(run.dataset, run.processed, cfg.match));
  }

  std::cout << "nll=" << summary_value(rep.nll) << "\n"
            << "brier=" << summary_value(rep.brier) << "\n"
            << "tce=" << summary_value(rep.tce) << "\n"
            << "mce=" << summary_value(rep.mce) << "\n"
            << "dtce=" << summary_value(rep.dtce) << "\n"
            << "dmce=" << summary_value(rep.dmce) << "\n"
            << "ap50=" << summary_value(rep.ap50) << "\n"
            << "matched=" << rep.counts.matched << "\n"
            << "unmatched_pred=" << rep.counts.unmatched_pred << "\n"
            << "missing_gt=" << rep.counts.missing_gt << "\n";
}

report::RunArtifact load_run_artifact(const std::string& run_dir) {
  const std::string path = run_dir + "/report.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path);
  }
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorKind::MalformedInput, "invalid JSON in " + path);
  }
  try {
    report::RunArtifact artifact;
    artifact.label = doc.at("label").get<std::string>();
    metrics::MetricsReport& r = artifact.report;
    r.num_classes = doc.at("num_classes").get<int>();
    const json& m = doc.at("metrics");
    r.nll = num_from(m.at("nll"));
    r.brier = num_from(m.at("brier"));
    r.tce = num_from(m.at("tce"));
    r.mce = num_from(m.at("mce"));
    r.dtce = num_from(m.at("dtce"));
    r.dmce = num_from(m.at("dmce"));
    r.ap50 = num_from(m.at("ap50"));
    const json& c = doc.at("counts");
    r.counts.matched = c.at("matched").get<long long>();
    r.counts.unmatched_pred = c.at("unmatched_pred").get<long long>();
    r.counts.missing_gt = c.at("missing_gt").get<long long>();
    const json& h = doc.at("entropy_histogram");
    r.entropy_hist.lo = h.at("lo").get<double>();
    r.entropy_hist.hi = h.at("hi").get<double>();
    r.entropy_hist.counts = h.at("counts").get<std::vector<long long>>();
    return artifact;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedInput, std::string("bad report.json: ") + e.what());
  }
}

void run_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) {
    throw Error(ErrorKind::InvalidConfig, "compare needs at least one run directory");
  }
  if (out_dir.empty()) {
    throw Error(ErrorKind::InvalidConfig, "out directory is required");
  }
  std::vector<report::RunArtifact> runs;
  runs.reserve(run_dirs.size());
  for (const auto& dir : run_dirs) runs.push_back(load_run_artifact(dir));
  fs::create_directories(out_dir);
  report::write_file(out_dir + "/comparison.csv", report::render_comparison_csv(runs));
  report::write_file(out_dir + "/comparison.md", report::render_comparison_markdown(runs));
  report::write_file(out_dir + "/entropy_panels.svg", report::render_entropy_panels_svg(runs));
  std::cout << "runs=" << runs.size() << "\n";
}

void run_sweep(const SweepConfig& cfg) {
  cfg.base.validate();
  if (cfg.grid.empty()) {
    throw Error(ErrorKind::InvalidConfig, "sweep grid is empty");
  }
  const LoadedRun run = load_and_build(cfg.base);
  const recal::SweepResult result =
      recal::sweep(run.set, cfg.grid, cfg.base.bins, cfg.base.recal_skip_missing);
  fs::create_directories(cfg.base.out_dir);
  report::write_file(cfg.base.out_dir + "/sweep.csv", recal::sweep_to_csv(result));
  report::write_file(cfg.base.out_dir + "/sweep_argmin.json", recal::sweep_argmin_json(result));
  const auto& best = result.rows[static_cast<std::size_t>(result.argmin_mce)];
  std::cout << "rows=" << result.rows.size() << "\n"
            << "argmin_mce_param=" << summary_value(best.param_value) << "\n"
            << "argmin_mce=" << summary_value(best.mce) << "\n";
}

void run_synth(const SynthCliConfig& cfg) {
  if (cfg.out_gt.empty() || cfg.out_pred.empty()) {
    throw Error(ErrorKind::InvalidConfig, "synth needs --out-gt and --out-pred");
  }
  std::pair<ingest::Dataset, ingest::PredictionDump> scene;
  switch (cfg.mode) {
    case SynthMode::Calibrated:
      scene = synth::generate(cfg.generate);
      break;
    case SynthMode::TceBlind:
      scene = synth::make_tce_blind_instance(cfg.generate.seed, cfg.blind_records);
      break;
    case SynthMode::Duplicates:
      scene = synth::make_duplicate_rich_instance(cfg.generate.seed, cfg.generate.num_images,
                                                  cfg.generate.num_classes);
      break;
  }
  report::write_file(cfg.out_gt, ingest::serialize_ground_truth(scene.first));
  report::write_file(cfg.out_pred, ingest::serialize_predictions(scene.second));
  std::cout << "images=" << scene.first.images.size() << "\n"
            << "annotations=" << scene.first.annotation_count() << "\n"
            << "detections=" << scene.second.detection_count() << "\n";
}

namespace {

int exit_code_for(const Error& e, bool compare_mode) {
  switch (e.kind()) {
    case ErrorKind::InvalidConfig:
      return 2;
    case ErrorKind::EmptyEvaluationSet:
      return 3;
    case ErrorKind::DimensionMismatch:
      return compare_mode ? 2 : 1;
    default:
      return 1;
  }
}

bool parse_range(const std::string& text, double& lo, double& hi, double& step) {
  char tail = 0;
  return std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &lo, &hi, &step, &tail) == 3 && step > 0.0;
}

void add_run_options(CLI::App* cmd, RunConfig& cfg, std::string& gt_format, std::string& pred_kind,
                     std::string& post_mode, std::string& match_mode) {
  cmd->add_option("--gt", cfg.gt_path, "ground-truth JSON path")->required();
  cmd->add_option("--pred", cfg.pred_path, "prediction dump JSON path")->required();
  cmd->add_option("--gt-format", gt_format, "coco|native")
      ->check(CLI::IsMember({"coco", "native"}));
  cmd->add_option("--pred-kind", pred_kind, "probs|logits (default: as declared in the file)")
      ->check(CLI::IsMember({"probs", "logits", "file"}));
  cmd->add_option("--postprocess", post_mode, "on|off")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--score-thresh", cfg.post.score_threshold, "score filter threshold");
  cmd->add_option("--nms-iou", cfg.post.nms_iou_threshold, "NMS IoU threshold");
  cmd->add_option("--top-k", cfg.post.top_k, "max detections per image after post-processing");
  cmd->add_option("--matching", match_mode, "one2one|many2one")
      ->check(CLI::IsMember({"one2one", "many2one"}));
  cmd->add_option("--iou-thresh", cfg.match.iou_threshold, "matching IoU threshold");
  cmd->add_option("--bins", cfg.bins.num_bins, "number of calibration bins");
  cmd->add_option("--label", cfg.label, "run label");
  cmd->add_option("--out", cfg.out_dir, "output directory")->required();
  cmd->add_flag("--recal-skip-missing,!--no-recal-skip-missing", cfg.recal_skip_missing,
                "leave missing-prediction placeholder vectors untransformed in sweeps");
  cmd->add_option("--match-debug", cfg.match_debug_path, "write MatchResults as JSON lines");
}

void finish_run_config(RunConfig& cfg, const std::string& gt_format, const std::string& pred_kind,
                       const std::string& post_mode, const std::string& match_mode) {
  cfg.gt_format =
      gt_format == "coco" ? ingest::GtFormat::CocoJson : ingest::GtFormat::NativeJson;
  cfg.pred_kind = pred_kind == "probs"    ? ingest::PredKind::Probs
                  : pred_kind == "logits" ? ingest::PredKind::Logits
                                          : ingest::PredKind::FromFile;
  cfg.post.enabled = post_mode == "on";
  cfg.match.mode =
      match_mode == "many2one" ? matching::MatchMode::ManyToOne : matching::MatchMode::OneToOne;
}

}  // namespace

int main_entry(int argc, char** argv) {
  CLI::App app{"detcal: calibration evaluation for multi-class object detectors"};
  app.require_subcommand(1);

  RunConfig run_cfg;
  std::string gt_format = "native";
  std::string pred_kind = "file";
  std::string post_mode = "on";
  std::string match_mode = "one2one";

  CLI::App* evaluate = app.add_subcommand("evaluate", "run the three-step evaluation pipeline");
  add_run_options(evaluate, run_cfg, gt_format, pred_kind, post_mode, match_mode);

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  CLI::App* compare = app.add_subcommand("compare", "tabulate several labeled runs side by side");
  compare->add_option("dirs", compare_dirs, "run directories containing report.json")->required();
  compare->add_option("--out", compare_out, "output directory")->required();

  RunConfig sweep_base;
  std::string sweep_gt_format = "native";
  std::string sweep_pred_kind = "file";
  std::string sweep_post_mode = "on";
  std::string sweep_match_mode = "one2one";
  std::string grid_bg_weight;
  std::string grid_temperature;
  CLI::App* sweep = app.add_subcommand("sweep", "re-score under a recalibration grid");
  add_run_options(sweep, sweep_base, sweep_gt_format, sweep_pred_kind, sweep_post_mode,
                  sweep_match_mode);
  sweep->add_option("--grid-bg-weight", grid_bg_weight, "background weight grid lo:hi:step");
  sweep->add_option("--grid-temperature", grid_temperature, "temperature grid lo:hi:step");

  SynthCliConfig synth_cfg;
  std::string synth_mode = "calibrated";
  std::string miscal = "none";
  std::string objects_range = "1:5";
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate synthetic GT and prediction files");
  synth_cmd->add_option("--seed", synth_cfg.generate.seed, "RNG seed");
  synth_cmd->add_option("--images", synth_cfg.generate.num_images, "number of images");
  synth_cmd->add_option("--classes", synth_cfg.generate.num_classes, "object class count K");
  synth_cmd->add_option("--objects", objects_range, "slots per image, lo:hi");
  synth_cmd->add_option("--miscal", miscal, "none|temperature:T|bgbias:B");
  synth_cmd->add_option("--sigma", synth_cfg.generate.box_jitter, "detection box jitter");
  synth_cmd->add_option("--miss-rate", synth_cfg.generate.miss_rate, "ground truth miss rate");
  synth_cmd->add_option("--spurious-rate", synth_cfg.generate.spurious_rate,
                        "extra background detection rate");
  synth_cmd->add_option("--mode", synth_mode, "calibrated|tce-blind|duplicates")
      ->check(CLI::IsMember({"calibrated", "tce-blind", "duplicates"}));
  synth_cmd->add_option("--records", synth_cfg.blind_records, "record count for tce-blind mode");
  synth_cmd->add_option("--out-gt", synth_cfg.out_gt, "ground truth output path")->required();
  synth_cmd->add_option("--out-pred", synth_cfg.out_pred, "prediction output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  const bool compare_mode = compare->parsed();
  try {
    if (evaluate->parsed()) {
      finish_run_config(run_cfg, gt_format, pred_kind, post_mode, match_mode);
      run_evaluate(run_cfg);
    } else if (compare_mode) {
      run_compare(compare_dirs, compare_out);
    } else if (sweep->parsed()) {
      finish_run_config(sweep_base, sweep_gt_format, sweep_pred_kind, sweep_post_mode,
                        sweep_match_mode);
      SweepConfig cfg;
      cfg.base = sweep_base;
      double lo = 0.0;
      double hi = 0.0;
      double step = 0.0;
      if (!grid_bg_weight.empty()) {
        if (!parse_range(grid_bg_weight, lo, hi, step)) {
          throw Error(ErrorKind::InvalidConfig, "bad --grid-bg-weight, expected lo:hi:step");
        }
        for (double v = lo; v <= hi + 1e-9; v += step) {
          cfg.grid.push_back({recal::TransformKind::BackgroundWeight, v});
        }
      }
      if (!grid_temperature.empty()) {
        if (!parse_range(grid_temperature, lo, hi, step)) {
          throw Error(ErrorKind::InvalidConfig, "bad --grid-temperature, expected lo:hi:step");
        }
        for (double v = lo; v <= hi + 1e-9; v += step) {
          cfg.grid.push_back({recal::TransformKind::TemperatureScale, v});
        }
      }
      run_sweep(cfg);
    } else if (synth_cmd->parsed()) {
      double lo = 0.0;
      double hi = 0.0;
      if (std::sscanf(objects_range.c_str(), "%lf:%lf", &lo, &hi) == 2) {
        synth_cfg.generate.objects_min = static_cast<int>(lo);
        synth_cfg.generate.objects_max = static_cast<int>(hi);
      } else {
        throw Error(ErrorKind::InvalidConfig, "bad --objects, expected lo:hi");
      }
      if (miscal == "none") {
        synth_cfg.generate.miscalibration = synth::Miscalibration::None;
      } else if (std::sscanf(miscal.c_str(), "temperature:%lf", &lo) == 1) {
        synth_cfg.generate.miscalibration = synth::Miscalibration::Temperature;
        synth_cfg.generate.temperature = lo;
      } else if (std::sscanf(miscal.c_str(), "bgbias:%lf", &lo) == 1) {
        synth_cfg.generate.miscalibration = synth::Miscalibration::BackgroundBias;
        synth_cfg.generate.background_bias = lo;
      } else {
        throw Error(ErrorKind::InvalidConfig, "bad --miscal, expected none|temperature:T|bgbias:B");
      }
      synth_cfg.mode = synth_mode == "tce-blind"    ? SynthMode::TceBlind
                       : synth_mode == "duplicates" ? SynthMode::Duplicates
                                                    : SynthMode::Calibrated;
      run_synth(synth_cfg);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e, compare_mode);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace detcal::cli
