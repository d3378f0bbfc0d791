#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchlab/config.hpp"
#include "batchlab/dataset.hpp"
#include "batchlab/trainer.hpp"

namespace batchlab {

// One trained run inside an ablation ladder, with everything the report
// needs. wall_seconds is informational only and never serialized, so
// reruns of the same config produce byte-identical files.
struct RunReport {
  std::string rung;
  RunConfig config;  // flags folded in; the run is reproducible from this
  double final_train_error = 0.0;
  double final_val_error = -1.0;  // negative = no validation set
  std::size_t epochs = 0;
  std::size_t iterations = 0;
  std::size_t batch = 0;
  double lr = 0.0;
  double sigma_sq = 0.0;
  std::uint64_t input_hash = 0;  // FNV-1a over config text and data bytes
  double wall_seconds = 0.0;
  std::string epochs_csv, distance_csv, config_snapshot;  // written files
  std::vector<EpochStat> epoch_stats;
  DistanceSeries distance;
};

// Fixed ladder order. Each rung adds one remedy on top of the previous:
// small batch baseline, large batch, sqrt-scaled lr, ghost normalization,
// schedule stretched by the batch-size ratio.
const std::vector<std::string>& ladder_rungs();  // SB, LB, LB+LR, LB+LR+GBN, LB+LR+GBN+RA

// The base config with the rung's ablation flags set (mult_noise is left
// off for every rung; it is a separate experiment, not a ladder step).
RunConfig rung_config(const RunConfig& base, const std::string& rung);

// Trains one rung and writes <out>/<rung>/{epochs.csv,distance.csv,
// effective_config.ini}. model_out, when given, receives the trained model.
RunReport run_single(const RunConfig& cfg, const std::string& rung,
                     const Dataset& train, const Dataset& val,
                     const std::string& out_dir,
                     std::shared_ptr<Mlp>* model_out = nullptr);

// Runs the whole ladder on data materialized from base.dataset. Every rung
// reuses the same master seed, so runs differ only through their flags. If
// a rung throws, the reports finished so far are still written to disk
// (summary + charts) before the error propagates.
std::vector<RunReport> run_ablation(const RunConfig& base);

// summary.csv (rows in the given order), the two SVG charts, and nothing
// else. The validation chart is omitted when no run has validation data.
void emit_report(const std::vector<RunReport>& reports, const std::string& out_dir);

// Just the SVG charts, for regenerating them from reloaded CSVs.
void emit_charts(const std::vector<RunReport>& reports, const std::string& out_dir);

}  // namespace batchlab
