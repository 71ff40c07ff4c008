#pragma once

#include <Eigen/Core>

#include <string_view>
#include <vector>

#include "arnet/featio.hpp"

namespace arnet {

/// Scores are clamped to [kScoreFloor, 1 - kScoreFloor] inside logarithms.
inline constexpr double kScoreFloor = 1e-7;

struct LossOutput {
  double value = 0.0;
  Eigen::RowVectorXd dl_dscores;
};

/// The k highest-scoring clips of one video, in descending score order.
struct TopKSelection {
  Eigen::Index k = 0;
  std::vector<Eigen::Index> indices;
  std::vector<double> values;
};

/// k = ceil(t / alpha).
Eigen::Index dynamic_k(Eigen::Index clip_count, double alpha);

/// Ties are broken toward the lower clip index.
TopKSelection select_topk(const Eigen::RowVectorXd& scores, double alpha);

/// Mean binary cross-entropy between each of the top-k scores and the video
/// label; gradient is zero outside the selection.
LossOutput dmil_loss(const Eigen::RowVectorXd& scores, VideoLabel label, double alpha);

/// Variance of a normal video's scores around their mean; zero for
/// anomalous videos.
LossOutput center_loss(const Eigen::RowVectorXd& scores, VideoLabel label);

/// dmil_loss + lambda * center_loss.
LossOutput total_loss(const Eigen::RowVectorXd& scores, VideoLabel label, double alpha,
                      double lambda);

/// Baseline: cross-entropy between the mean of the top-k scores and the
/// label (one term per video).
LossOutput kmax_mil_loss(const Eigen::RowVectorXd& scores, VideoLabel label, double alpha);

enum class LossMode { kmax_mil_baseline, dmil, dmil_plus_center };

std::string_view to_string(LossMode mode);
/// Accepts the enum spellings plus `kmax-baseline`, `dmil-plus-center`.
LossMode parse_loss_mode(std::string_view text);

/// Objective of one video for a loss mode, split into its two terms.
struct VideoObjective {
  double selection = 0.0;  // dmil or k-max MIL term
  double center = 0.0;     // unweighted center term (0 unless mode uses it)
  double total = 0.0;
  Eigen::RowVectorXd dl_dscores;
};

VideoObjective video_objective(const Eigen::RowVectorXd& scores, VideoLabel label,
                               LossMode mode, double alpha, double lambda);

}  // namespace arnet
