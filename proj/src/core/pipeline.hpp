#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/metrics.hpp"
#include "core/protocols.hpp"
#include "core/trainer.hpp"

namespace idminer::pipeline {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kManifestFormat = 1;
inline constexpr int kCheckpointFormat = 1;

// Every command drops a run manifest next to its outputs recording the exact
// inputs: command name, library and format versions, seed, input file hashes,
// and the resolved options. No timestamps, so identical runs write identical
// bytes.

std::filesystem::path run_synth_gen(const std::filesystem::path& config_path,
                                    const std::filesystem::path& out_dir, std::uint64_t seed);

train::TrainResult run_train(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& out_dir,
                             const train::TrainConfig& config);

train::TrainResult run_resume(const std::filesystem::path& checkpoint_path,
                              const std::filesystem::path& manifest_path,
                              const std::filesystem::path& out_dir,
                              const train::TrainConfig& config);

struct EvalOptions {
    std::string protocol = "conventional";  // conventional | whitehat | surrogate | all
    std::string surrogate_kind = "jpeg";
    int surrogate_level = 3;
    std::string detector = "idminer";       // idminer | meanfeat
    std::string reference = "auto";         // auto | based | free
};

struct MetricsSummary {
    std::string protocol;
    std::optional<data::SurrogateWrap> wrap;
    double auc = 0.0;
    double acc = 0.0;             // at threshold 0.5
    double acc_calibrated = 0.0;
    double calibration_threshold = 0.0;
    int n_pairs = 0;
    int skipped = 0;
};

struct EvalResult {
    std::map<std::string, MetricsSummary> by_name;
    // Mean relative AUC drop of the rebalanced protocols against
    // conventional; set by `--protocol all` runs only.
    std::optional<double> avg_drop;
    std::filesystem::path metrics_path;
};

EvalResult run_eval(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& checkpoint_path, const EvalOptions& options,
                    const std::filesystem::path& out_prefix);

struct ReidResult {
    eval::ReidReport report;
    int n_gallery = 0;
    std::filesystem::path report_path;
};

ReidResult run_reid(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& checkpoint_path, const std::string& detector,
                    const std::filesystem::path& out_prefix);

struct SweepRow {
    std::string kind;
    int level = 0;
    double auc = 0.0;
    double acc_calibrated = 0.0;
    int n_pairs = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::filesystem::path csv_path;
};

SweepResult run_sweep(const std::filesystem::path& manifest_path,
                      const std::filesystem::path& checkpoint_path, const std::string& detector,
                      const std::filesystem::path& out_prefix);

struct GradCheckSummary {
    double max_rel_err = 0.0;
    std::string worst_check;
    bool passed = false;
    std::filesystem::path report_path;
};

// Central-difference verification of every hand-derived gradient: per seeded
// configuration, an encoder + frame-level loss check, an aggregator + video
// level loss check, and the full training composition.
GradCheckSummary run_grad_check(std::uint64_t seed, int configurations, double tolerance,
                                const std::filesystem::path& report_path);

// Metrics over an externally produced score CSV (pair schema). With
// `average_frames`, rows sharing a pair_id are frame scores of one video
// pair and collapse to their mean.
EvalResult run_eval_scores(const std::filesystem::path& scores_path, bool average_frames,
                           const std::filesystem::path& out_prefix);

}  // namespace idminer::pipeline
