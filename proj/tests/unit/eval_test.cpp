#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "arnet/errors.hpp"
#include "arnet/eval.hpp"
#include "arnet/rng.hpp"
#include "arnet/trainer.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

namespace arnet {
namespace {

using Labels = std::vector<std::uint8_t>;

TEST(Auc, PerfectSeparation) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.1}, Labels{1, 0}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.9}, Labels{1, 0}), 0.0);
}

TEST(Auc, FullTieIsHalf) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5}, Labels{1, 0}), 0.5);
}

TEST(Auc, SingleClassRejected) {
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, Labels{1, 1}), std::invalid_argument);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, Labels{0, 0}), std::invalid_argument);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1}, Labels{0, 1}), std::invalid_argument);
}

void random_instance(Rng& rng, std::size_t n, std::vector<double>& s, Labels& y, int levels) {
  s.resize(n);
  y.resize(n);
  do {
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
      s[i] = levels > 0 ? static_cast<double>(rng.index(static_cast<std::size_t>(levels))) : rng.uniform01();
    }
  } while (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0);
}

TEST(Auc, MatchesBruteForce) {
  Rng rng(1);
  std::vector<double> s;
  Labels y;
  for (int trial = 0; trial < 100; ++trial) {
    random_instance(rng, 200, s, y, trial % 2 ? 7 : 0);
    ASSERT_NEAR(roc_auc(s, y), oracle::brute_force_auc(s, y), 1e-12);
  }
}

TEST(Auc, InvariantUnderIncreasingTransform) {
  Rng rng(2);
  std::vector<double> s;
  Labels y;
  for (int trial = 0; trial < 50; ++trial) {
    random_instance(rng, 100, s, y, trial % 2 ? 5 : 0);
    std::vector<double> t(s.size());
    std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::exp(3 * v) - 7; });
    ASSERT_EQ(roc_auc(s, y), roc_auc(t, y));
  }
}

TEST(Auc, NegationComplements) {
  Rng rng(3);
  std::vector<double> s;
  Labels y;
  for (int trial = 0; trial < 50; ++trial) {
    random_instance(rng, 150, s, y, 0);
    std::vector<double> neg(s.size());
    std::transform(s.begin(), s.end(), neg.begin(), [](double v) { return -v; });
    ASSERT_NEAR(roc_auc(s, y) + roc_auc(neg, y), 1.0, 1e-12);
  }
}

TEST(Far, StrictThreshold) {
  EXPECT_EQ(false_alarm_rate(std::vector<double>{0.5, 0.3, 0.9}, Labels{0, 0, 1}, 0.5), 0.0);
  EXPECT_EQ(false_alarm_rate(std::vector<double>{0.6, 0.4}, Labels{0, 0}, 0.5), 0.5);
  EXPECT_THROW(false_alarm_rate(std::vector<double>{0.6, 0.4}, Labels{1, 1}, 0.5), std::invalid_argument);
}

TEST(Far, NonIncreasingInThreshold) {
  Rng rng(4);
  std::vector<double> s;
  Labels y;
  random_instance(rng, 300, s, y, 0);
  double prev = 1.0;
  for (double th = -0.1; th <= 1.1; th += 0.01) {
    const double f = false_alarm_rate(s, y, th);
    ASSERT_LE(f, prev);
    ASSERT_GE(f, 0.0);
    prev = f;
  }
}

std::vector<FeatureBag> synthetic_test_set(std::uint64_t seed) {
  SyntheticSpec s;
  s.feature_dim = 8;
  s.n_normal = 1;
  s.n_abnormal = 1;
  s.n_test_normal = 6;
  s.n_test_abnormal = 6;
  s.min_clips = 5;
  s.max_clips = 20;
  s.seed = seed;
  return generate_synthetic_dataset(s).test;
}

TEST(Evaluate, ConstantHalfModel) {
  const auto bags = synthetic_test_set(1);
  const auto r = evaluate(ModelParameters::zeros(8), bags, 0.5);
  EXPECT_EQ(r.auc, 0.5);
  EXPECT_EQ(r.far, 0.0);
  std::uint64_t frames = 0;
  for (const auto& b : bags) frames += b.frame_count;
  EXPECT_EQ(r.n_frames_pos + r.n_frames_neg, frames);
  ASSERT_EQ(r.traces.size(), bags.size());
  for (std::size_t i = 0; i < bags.size(); ++i) {
    EXPECT_EQ(r.traces[i].video_id, bags[i].video_id);
    EXPECT_EQ(r.traces[i].frame_scores.size(), bags[i].frame_count);
  }
}

TEST(Evaluate, SingleNormalVideoBelowThreshold) {
  FeatureBag b;
  b.video_id = "n";
  b.features = Eigen::MatrixXf::Ones(2, 3);
  b.frame_count = 48;
  b.frame_truth = std::vector<std::uint8_t>(48, 0);
  auto p = ModelParameters::zeros(2);
  p.b_ar = -2.0;
  const std::vector<FeatureBag> bags{b};
  // AUC is undefined without positives; FAR alone is well defined.
  EXPECT_THROW(evaluate(p, bags), std::invalid_argument);
  const auto s = predict(p, b.features.cast<double>());
  const auto frames = expand_clip_scores_to_frames({s.data(), 3}, 48);
  EXPECT_EQ(false_alarm_rate(frames, *b.frame_truth, 0.5), 0.0);
}

TEST(Evaluate, MatchesPooledFrameMetrics) {
  const auto bags = synthetic_test_set(2);
  const auto p = xavier_init(8, 5);
  const auto r = evaluate(p, bags, 0.5);
  std::vector<double> scores;
  Labels truth;
  for (const auto& b : bags) {
    const auto s = oracle::scalar_scores(p, b.features.cast<double>());
    for (std::uint32_t j = 0; j < b.frame_count; ++j) {
      scores.push_back(s[std::min<std::size_t>(j / 16, s.size() - 1)]);
      truth.push_back((*b.frame_truth)[j]);
    }
  }
  EXPECT_NEAR(r.auc, oracle::brute_force_auc(scores, truth), 1e-12);
  std::size_t alarms = 0, negatives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (truth[i]) continue;
    ++negatives;
    alarms += scores[i] > 0.5;
  }
  EXPECT_DOUBLE_EQ(r.far, static_cast<double>(alarms) / static_cast<double>(negatives));
}

TEST(Evaluate, VideoOrderDoesNotMatter) {
  auto bags = synthetic_test_set(3);
  const auto p = xavier_init(8, 6);
  const auto a = evaluate(p, bags);
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    for (std::size_t i = bags.size() - 1; i > 0; --i) std::swap(bags[i], bags[rng.index(i + 1)]);
    const auto b = evaluate(p, bags);
    EXPECT_EQ(a.auc, b.auc);
    EXPECT_EQ(a.far, b.far);
  }
}

TEST(Evaluate, MissingTruthListsEveryVideo) {
  auto bags = synthetic_test_set(4);
  bags[1].frame_truth.reset();
  bags[4].frame_truth.reset();
  try {
    evaluate(ModelParameters::zeros(8), bags);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(bags[1].video_id), std::string::npos) << msg;
    EXPECT_NE(msg.find(bags[4].video_id), std::string::npos) << msg;
  }
}

TEST(Evaluate, DimensionMismatchRejected) {
  EXPECT_THROW(evaluate(ModelParameters::zeros(3), synthetic_test_set(5)), ShapeError);
}

TEST(Report, FilesAndFormat) {
  testing::TempDir dir;
  EvaluationReport r;
  r.auc = 0.75;
  r.far = 0.125;
  r.n_frames_pos = 16;
  r.n_frames_neg = 16;
  r.traces.push_back({"vid", {0.25, 0.5}, {0, 1}});
  r.config_echo = {{"alpha", "4"}};
  const auto files = write_report(r, dir.path());
  EXPECT_EQ(files.size(), 2u);
  EXPECT_EQ(testing::slurp(dir / "summary.csv"),
            "metric,value\nauc,0.75\nfar,0.125\nthreshold,0.5\nn_frames_pos,16\nn_frames_neg,16\nalpha,4\n");
  EXPECT_EQ(testing::slurp(dir.path() / "traces" / "vid.csv"), "frame_index,score,truth\n0,0.25,0\n1,0.5,1\n");
}

struct SweepData {
  std::vector<FeatureBag> train, test;
};

SweepData sweep_data() {
  SyntheticSpec s;
  s.feature_dim = 16;
  s.n_normal = 20;
  s.n_abnormal = 20;
  s.n_test_normal = 8;
  s.n_test_abnormal = 8;
  s.seed = 11;
  auto d = generate_synthetic_dataset(s);
  return {std::move(d.train), std::move(d.test)};
}

TrainingConfig sweep_config() {
  TrainingConfig c;
  c.learning_rate = 1e-3;
  c.seed = 11;
  return c;
}

TEST(Sweep, SingleAlphaMatchesPlainRun) {
  const auto d = sweep_data();
  auto c = sweep_config();
  c.epochs = 40;
  const std::vector<double> alphas{4.0};
  const auto rows = sweep_alpha(d.train, d.test, c, alphas);
  ASSERT_EQ(rows.size(), 1u);
  c.alpha = 4.0;
  const auto plain = evaluate(train(d.train, c).params, d.test);
  EXPECT_EQ(rows[0].alpha, 4.0);
  EXPECT_EQ(rows[0].auc, plain.auc);
  EXPECT_EQ(rows[0].far, plain.far);
}

TEST(Sweep, DuplicateAlphasGiveIdenticalRows) {
  const auto d = sweep_data();
  auto c = sweep_config();
  c.epochs = 20;
  const std::vector<double> alphas{2.0, 2.0, 8.0};
  const auto rows = sweep_alpha(d.train, d.test, c, alphas);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].auc, rows[1].auc);
  EXPECT_EQ(rows[0].far, rows[1].far);
  EXPECT_EQ(rows[2].alpha, 8.0);
}

TEST(Sweep, SeparableDataScoresWellAcrossAlphas) {
  const auto d = sweep_data();
  const std::vector<double> alphas{1.0, 4.0, 16.0};
  const auto rows = sweep_alpha(d.train, d.test, sweep_config(), alphas);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i].alpha, alphas[i]);
    EXPECT_GE(rows[i].auc, 0.9) << "alpha " << alphas[i];
  }
}

TEST(Sweep, EmptyAlphaListRejected) {
  const auto d = sweep_data();
  EXPECT_THROW(sweep_alpha(d.train, d.test, sweep_config(), std::vector<double>{}), std::invalid_argument);
}

TEST(Sweep, CsvFormat) {
  testing::TempDir dir;
  const std::vector<SweepRow> rows{{1, 0.5, 0}, {4, 0.96875, 0.25}};
  write_sweep_csv(rows, dir / "s.csv");
  EXPECT_EQ(testing::slurp(dir / "s.csv"), "alpha,auc,far\n1,0.5,0\n4,0.96875,0.25\n");
}

}  // namespace
}  // namespace arnet
