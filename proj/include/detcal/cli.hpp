#pragma once

#include <string>
#include <vector>

#include "detcal/ingest.hpp"
#include "detcal/matching.hpp"
#include "detcal/metrics.hpp"
#include "detcal/postprocess.hpp"
#include "detcal/recal.hpp"
#include "detcal/report.hpp"
#include "detcal/synth.hpp"

namespace detcal::cli {

struct RunConfig {
  std::string gt_path;
  std::string pred_path;
  std::string out_dir;
  ingest::GtFormat gt_format = ingest::GtFormat::NativeJson;
  ingest::PredKind pred_kind = ingest::PredKind::FromFile;
  postprocess::PostProcessConfig post;
  matching::MatchConfig match;
  metrics::BinningConfig bins;
  int entropy_bins = 30;
  std::string label = "run";
  bool recal_skip_missing = true;
  std::string match_debug_path;  // empty = no debug dump

  void validate() const;
};

/// evaluate: ingest -> post-process -> match -> metrics -> artifacts under
/// out_dir (report.json, curves.csv, plot_*.svg, entropy_hist.csv) plus a
/// metric=value summary on stdout.
void run_evaluate(const RunConfig& cfg);

/// compare: reads report.json from each run dir, writes comparison.csv,
/// comparison.md and entropy_panels.svg under out_dir.
void run_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir);

struct SweepConfig {
  RunConfig base;
  std::vector<recal::RecalTransform> grid;
};

/// sweep: builds the evaluation set like evaluate, then re-scores it under
/// every transform; writes sweep.csv and sweep_argmin.json.
void run_sweep(const SweepConfig& cfg);

enum class SynthMode { Calibrated, TceBlind, Duplicates };

struct SynthCliConfig {
  synth::SyntheticConfig generate;
  SynthMode mode = SynthMode::Calibrated;
  int blind_records = 10000;
  std::string out_gt;
  std::string out_pred;
};

void run_synth(const SynthCliConfig& cfg);

report::RunArtifact load_run_artifact(const std::string& run_dir);

std::string report_to_json(const report::RunArtifact& artifact, const RunConfig& cfg);

/// Full argv entry point; maps Error kinds onto exit codes.
int main_entry(int argc, char** argv);

}  // namespace detcal::cli
