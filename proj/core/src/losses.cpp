#include "arnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace arnet {
namespace {

double clamp_score(double s) { return std::clamp(s, kScoreFloor, 1.0 - kScoreFloor); }

void check_scores(const Eigen::RowVectorXd& scores) {
  if (scores.size() < 1) throw std::invalid_argument("score vector must hold at least one clip");
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be a positive finite number");
}

}  // namespace

Eigen::Index dynamic_k(Eigen::Index clip_count, double alpha) {
  check_alpha(alpha);
  if (clip_count < 1) throw std::invalid_argument("clip count must be >= 1");
  const double raw = std::ceil(static_cast<double>(clip_count) / alpha);
  return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(raw), 1, clip_count);
}

TopKSelection select_topk(const Eigen::RowVectorXd& scores, double alpha) {
  check_scores(scores);
  TopKSelection sel;
  sel.k = dynamic_k(scores.size(), alpha);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::partial_sort(order.begin(), order.begin() + sel.k, order.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  sel.indices.assign(order.begin(), order.begin() + sel.k);
  sel.values.reserve(sel.indices.size());
  for (auto idx : sel.indices) sel.values.push_back(scores[idx]);
  return sel;
}

LossOutput dmil_loss(const Eigen::RowVectorXd& scores, VideoLabel label, double alpha) {
  const TopKSelection sel = select_topk(scores, alpha);
  const double k = static_cast<double>(sel.k);
  const bool anomalous = label == VideoLabel::anomalous;
  LossOutput out;
  out.dl_dscores = Eigen::RowVectorXd::Zero(scores.size());
  for (auto j : sel.indices) {
    const double s = clamp_score(scores[j]);
    if (anomalous) {
      out.value -= std::log(s);
      out.dl_dscores[j] = -1.0 / (k * s);
    } else {
      out.value -= std::log(1.0 - s);
      out.dl_dscores[j] = 1.0 / (k * (1.0 - s));
    }
  }
  out.value /= k;
  return out;
}

LossOutput center_loss(const Eigen::RowVectorXd& scores, VideoLabel label) {
  check_scores(scores);
  LossOutput out;
  out.dl_dscores = Eigen::RowVectorXd::Zero(scores.size());
  if (label == VideoLabel::anomalous) return out;
  const double t = static_cast<double>(scores.size());
  const double center = scores.mean();
  const Eigen::RowVectorXd deviation = scores.array() - center;
  out.value = deviation.squaredNorm() / t;
  // The deviations sum to zero, so treating the center as a constant gives
  // the exact gradient.
  out.dl_dscores = (2.0 / t) * deviation;
  return out;
}

LossOutput total_loss(const Eigen::RowVectorXd& scores, VideoLabel label, double alpha,
                      double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  LossOutput out = dmil_loss(scores, label, alpha);
  if (lambda == 0.0 || label == VideoLabel::anomalous) return out;
  const LossOutput center = center_loss(scores, label);
  out.value += lambda * center.value;
  out.dl_dscores += lambda * center.dl_dscores;
  return out;
}

LossOutput kmax_mil_loss(const Eigen::RowVectorXd& scores, VideoLabel label, double alpha) {
  const TopKSelection sel = select_topk(scores, alpha);
  const double k = static_cast<double>(sel.k);
  double mean = 0.0;
  for (double v : sel.values) mean += v;
  mean = clamp_score(mean / k);

  LossOutput out;
  out.dl_dscores = Eigen::RowVectorXd::Zero(scores.size());
  double dl_dmean = 0.0;
  if (label == VideoLabel::anomalous) {
    out.value = -std::log(mean);
    dl_dmean = -1.0 / mean;
  } else {
    out.value = -std::log(1.0 - mean);
    dl_dmean = 1.0 / (1.0 - mean);
  }
  for (auto j : sel.indices) out.dl_dscores[j] = dl_dmean / k;
  return out;
}

std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::kmax_mil_baseline: return "kmax_mil_baseline";
    case LossMode::dmil: return "dmil";
    case LossMode::dmil_plus_center: return "dmil_plus_center";
  }
  return "unknown";
}

LossMode parse_loss_mode(std::string_view text) {
  if (text == "kmax_mil_baseline" || text == "kmax-baseline" || text == "kmax_baseline" ||
      text == "kmax-mil-baseline") {
    return LossMode::kmax_mil_baseline;
  }
  if (text == "dmil") return LossMode::dmil;
  if (text == "dmil_plus_center" || text == "dmil-plus-center") return LossMode::dmil_plus_center;
  throw std::invalid_argument("unknown loss mode '" + std::string(text) +
                              "' (expected kmax-baseline, dmil or dmil-plus-center)");
}

VideoObjective video_objective(const Eigen::RowVectorXd& scores, VideoLabel label,
                               LossMode mode, double alpha, double lambda) {
  VideoObjective obj;
  switch (mode) {
    case LossMode::kmax_mil_baseline: {
      auto l = kmax_mil_loss(scores, label, alpha);
      obj.selection = l.value;
      obj.dl_dscores = std::move(l.dl_dscores);
      break;
    }
    case LossMode::dmil: {
      auto l = dmil_loss(scores, label, alpha);
      obj.selection = l.value;
      obj.dl_dscores = std::move(l.dl_dscores);
      break;
    }
    case LossMode::dmil_plus_center: {
      if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
      auto l = dmil_loss(scores, label, alpha);
      auto c = center_loss(scores, label);
      obj.selection = l.value;
      obj.center = c.value;
      obj.dl_dscores = l.dl_dscores + lambda * c.dl_dscores;
      break;
    }
  }
  obj.total = obj.selection + (mode == LossMode::dmil_plus_center ? lambda * obj.center : 0.0);
  return obj;
}

}  // namespace arnet
