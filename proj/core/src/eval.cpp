#include "arnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "arnet/errors.hpp"
#include "arnet/format.hpp"
#include "arnet/trainer.hpp"
#include "binary_io.hpp"

namespace fs = std::filesystem;

namespace arnet {
namespace {

void check_lengths(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels differ in length (" +
                                std::to_string(scores.size()) + " vs " +
                                std::to_string(labels.size()) + ")");
  }
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_lengths(scores, labels);
  // Keeps 2 * n_pos * n_neg within 64 bits.
  if (scores.size() >= (std::size_t{1} << 31)) throw std::invalid_argument("roc_auc: too many samples");
  for (double s : scores) {
    if (std::isnan(s)) throw std::invalid_argument("roc_auc: NaN score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk tie groups in ascending score order. Each positive in a group beats
  // every negative seen in earlier groups and ties with the group's
  // negatives. Counts are doubled so the tie half-credit stays integral.
  std::uint64_t n_pos = 0;
  std::uint64_t n_neg = 0;
  std::uint64_t twice_correct = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t group_pos = 0;
    std::uint64_t group_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? group_pos : group_neg) += 1;
      ++j;
    }
    twice_correct += group_pos * (2 * n_neg + group_neg);
    n_pos += group_pos;
    n_neg += group_neg;
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("roc_auc needs at least one positive and one negative label");
  }
  const long double pairs = static_cast<long double>(n_pos) * static_cast<long double>(n_neg);
  return static_cast<double>(static_cast<long double>(twice_correct) / (2.0L * pairs));
}

double false_alarm_rate(std::span<const double> scores, std::span<const std::uint8_t> labels,
                        double threshold) {
  check_lengths(scores, labels);
  std::uint64_t negatives = 0;
  std::uint64_t alarms = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i]) continue;
    ++negatives;
    if (scores[i] > threshold) ++alarms;
  }
  if (negatives == 0) throw std::invalid_argument("false_alarm_rate needs at least one negative label");
  return static_cast<double>(alarms) / static_cast<double>(negatives);
}

EvaluationReport evaluate(const ModelParameters& params, std::span<const FeatureBag> test_bags,
                          double threshold) {
  if (test_bags.empty()) throw std::invalid_argument("evaluate: empty test set");
  std::string missing;
  for (const auto& b : test_bags) {
    if (!b.frame_truth) missing += (missing.empty() ? "" : ", ") + b.video_id;
  }
  if (!missing.empty()) throw std::invalid_argument("missing frame truth for videos: " + missing);
  for (const auto& b : test_bags) {
    if (b.feature_dim() != params.feature_dim()) {
      throw ShapeError("checkpoint feature_dim " + std::to_string(params.feature_dim()) +
                       " does not match feature_dim " + std::to_string(b.feature_dim()) +
                       " of video '" + b.video_id + "'");
    }
  }

  EvaluationReport report;
  report.threshold = threshold;
  std::vector<double> all_scores;
  std::vector<std::uint8_t> all_truth;
  for (const auto& b : test_bags) {
    const Eigen::RowVectorXd clip_scores = predict(params, b.features.cast<double>());
    VideoTrace trace;
    trace.video_id = b.video_id;
    trace.frame_scores = expand_clip_scores_to_frames(
        std::span<const double>(clip_scores.data(), static_cast<std::size_t>(clip_scores.size())),
        b.frame_count);
    trace.truth = *b.frame_truth;
    all_scores.insert(all_scores.end(), trace.frame_scores.begin(), trace.frame_scores.end());
    all_truth.insert(all_truth.end(), trace.truth.begin(), trace.truth.end());
    report.traces.push_back(std::move(trace));
  }
  for (auto v : all_truth) (v ? report.n_frames_pos : report.n_frames_neg) += 1;
  report.auc = roc_auc(all_scores, all_truth);
  report.far = false_alarm_rate(all_scores, all_truth, threshold);
  return report;
}

std::vector<fs::path> write_report(const EvaluationReport& report, const fs::path& directory) {
  std::vector<fs::path> written;
  fs::create_directories(directory / "traces");

  std::string summary = "metric,value\n";
  summary += "auc," + format_real(report.auc) + '\n';
  summary += "far," + format_real(report.far) + '\n';
  summary += "threshold," + format_real(report.threshold) + '\n';
  summary += "n_frames_pos," + std::to_string(report.n_frames_pos) + '\n';
  summary += "n_frames_neg," + std::to_string(report.n_frames_neg) + '\n';
  for (const auto& [key, value] : report.config_echo) summary += key + ',' + value + '\n';
  const fs::path summary_path = directory / "summary.csv";
  detail::write_file_bytes(summary_path, summary);
  written.push_back(summary_path);

  for (const auto& trace : report.traces) {
    std::string text = "frame_index,score,truth\n";
    for (std::size_t i = 0; i < trace.frame_scores.size(); ++i) {
      text += std::to_string(i) + ',' + format_real(trace.frame_scores[i]) + ',' +
              (trace.truth[i] ? '1' : '0') + '\n';
    }
    const fs::path p = directory / "traces" / (trace.video_id + ".csv");
    detail::write_file_bytes(p, text);
    written.push_back(p);
  }
  return written;
}

std::vector<SweepRow> sweep_alpha(std::span<const FeatureBag> train_bags,
                                  std::span<const FeatureBag> test_bags,
                                  const TrainingConfig& base_config, std::span<const double> alphas,
                                  double threshold) {
  if (alphas.empty()) throw std::invalid_argument("sweep_alpha: no alpha values given");
  std::vector<SweepRow> rows;
  rows.reserve(alphas.size());
  for (double alpha : alphas) {
    TrainingConfig config = base_config;
    config.alpha = alpha;
    const TrainingResult trained = train(train_bags, config);
    const EvaluationReport report = evaluate(trained.params, test_bags, threshold);
    rows.push_back({alpha, report.auc, report.far});
  }
  return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, const fs::path& path) {
  std::string text = "alpha,auc,far\n";
  for (const auto& r : rows) {
    text += format_real(r.alpha) + ',' + format_real(r.auc) + ',' + format_real(r.far) + '\n';
  }
  detail::write_file_bytes(path, text);
}

}  // namespace arnet
