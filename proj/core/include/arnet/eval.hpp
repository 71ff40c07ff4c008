#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arnet/featio.hpp"
#include "arnet/netcore.hpp"

namespace arnet {

struct TrainingConfig;

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
/// Requires at least one label of each class.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Fraction of negative-label entries whose score strictly exceeds
/// `threshold`. Requires at least one negative.
double false_alarm_rate(std::span<const double> scores, std::span<const std::uint8_t> labels,
                        double threshold);

struct VideoTrace {
  std::string video_id;
  std::vector<double> frame_scores;
  std::vector<std::uint8_t> truth;
};

struct EvaluationReport {
  double auc = 0.0;
  double far = 0.0;
  double threshold = 0.5;
  std::uint64_t n_frames_pos = 0;
  std::uint64_t n_frames_neg = 0;
  std::vector<VideoTrace> traces;  // test-set order
  std::vector<std::pair<std::string, std::string>> config_echo;
};

/// Scores each bag in eval mode, expands clip scores to frames, and computes
/// AUC and FAR over all frames pooled in input order. Every bag needs
/// frame_truth; the error message lists each video that lacks it.
EvaluationReport evaluate(const ModelParameters& params, std::span<const FeatureBag> test_bags,
                          double threshold = 0.5);

/// Writes `summary.csv` (metric,value) and `traces/<video_id>.csv`
/// (frame_index,score,truth) under `directory`. Returns the written paths.
std::vector<std::filesystem::path> write_report(const EvaluationReport& report,
                                                const std::filesystem::path& directory);

struct SweepRow {
  double alpha = 0.0;
  double auc = 0.0;
  double far = 0.0;
};

/// Trains one model per alpha from the same base seed and evaluates it.
/// Rows come back in input order.
std::vector<SweepRow> sweep_alpha(std::span<const FeatureBag> train_bags,
                                  std::span<const FeatureBag> test_bags,
                                  const TrainingConfig& base_config, std::span<const double> alphas,
                                  double threshold = 0.5);

/// `alpha,auc,far` CSV.
void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

}  // namespace arnet
