#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "arnet/errors.hpp"
#include "arnet/featio.hpp"
#include "arnet/rng.hpp"
#include "support/temp_dir.hpp"

namespace arnet {
namespace {

using testing::TempDir;

FeatureBag two_by_one() {
  FeatureBag b;
  b.video_id = "v";
  b.features.resize(2, 1);
  b.features << 0.5f, -1.0f;
  b.frame_count = 16;
  return b;
}

TEST(FeatureFile, TwentyEightBytesForTwoByOne) {
  TempDir dir;
  const auto p = dir / "a.arf";
  write_feature_file(two_by_one(), p);
  EXPECT_EQ(std::filesystem::file_size(p), 28u);
  const auto bytes = testing::slurp(p);
  EXPECT_EQ(bytes.substr(0, 8), "ARNETF01");
  // F=2, t=1, frame_count=16, little-endian.
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 1);
  EXPECT_EQ(bytes[16], 16);

  const FeatureBag back = read_feature_file(p);
  ASSERT_EQ(back.feature_dim(), 2);
  ASSERT_EQ(back.clip_count(), 1);
  EXPECT_EQ(back.features(0, 0), 0.5f);
  EXPECT_EQ(back.features(1, 0), -1.0f);
  EXPECT_EQ(back.frame_count, 16u);
  EXPECT_EQ(back.label, VideoLabel::normal);
  EXPECT_FALSE(back.frame_truth.has_value());
}

TEST(FeatureFile, ColumnMajorOrder) {
  TempDir dir;
  FeatureBag b;
  b.features.resize(2, 2);
  b.features << 1.0f, 2.0f,
                3.0f, 4.0f;
  b.frame_count = 32;
  write_feature_file(b, dir / "c.arf");
  const auto bytes = testing::slurp(dir / "c.arf");
  float v[4];
  std::memcpy(v, bytes.data() + 20, sizeof v);
  EXPECT_EQ(v[0], 1.0f);
  EXPECT_EQ(v[1], 3.0f);
  EXPECT_EQ(v[2], 2.0f);
  EXPECT_EQ(v[3], 4.0f);
}

TEST(FeatureFile, RandomRoundTripIsBitExact) {
  TempDir dir;
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    FeatureBag b;
    const auto f = static_cast<Eigen::Index>(1 + rng.index(20));
    const auto t = static_cast<Eigen::Index>(1 + rng.index(20));
    b.features.resize(f, t);
    for (Eigen::Index i = 0; i < b.features.size(); ++i) {
      b.features.data()[i] = static_cast<float>(rng.normal() * 1e3);
    }
    b.frame_count = static_cast<std::uint32_t>(16 * t - rng.index(16));
    write_feature_file(b, dir / "r.arf");
    const auto back = read_feature_file(dir / "r.arf");
    ASSERT_EQ(back.features.rows(), f);
    ASSERT_EQ(back.features.cols(), t);
    ASSERT_EQ(back.frame_count, b.frame_count);
    ASSERT_EQ(std::memcmp(back.features.data(), b.features.data(),
                          sizeof(float) * static_cast<std::size_t>(f * t)),
              0);
  }
}

TEST(FeatureFile, NonFiniteRejectedWithoutWriting) {
  TempDir dir;
  auto b = two_by_one();
  b.features(1, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(write_feature_file(b, dir / "nan.arf"), std::invalid_argument);
  EXPECT_FALSE(std::filesystem::exists(dir / "nan.arf"));
  b.features(1, 0) = std::numeric_limits<float>::infinity();
  EXPECT_THROW(write_feature_file(b, dir / "inf.arf"), std::invalid_argument);
  EXPECT_FALSE(std::filesystem::exists(dir / "inf.arf"));
  EXPECT_TRUE(std::filesystem::is_empty(dir.path()));
}

TEST(FeatureFile, BadMagicRejected) {
  TempDir dir;
  write_feature_file(two_by_one(), dir / "a.arf");
  auto bytes = testing::slurp(dir / "a.arf");
  bytes.replace(0, 8, "XXXXXXXX");
  testing::spit(dir / "a.arf", bytes);
  EXPECT_THROW(read_feature_file(dir / "a.arf"), FormatError);
}

TEST(FeatureFile, TruncationRejected) {
  TempDir dir;
  write_feature_file(two_by_one(), dir / "a.arf");
  auto bytes = testing::slurp(dir / "a.arf");
  testing::spit(dir / "a.arf", bytes.substr(0, bytes.size() - 4));
  EXPECT_THROW(read_feature_file(dir / "a.arf"), FormatError);
  testing::spit(dir / "b.arf", bytes + "junk");
  EXPECT_THROW(read_feature_file(dir / "b.arf"), FormatError);
}

TEST(FeatureFile, ZeroDimensionsRejected) {
  TempDir dir;
  std::string header = "ARNETF01";
  header += std::string("\0\0\0\0", 4);      // F = 0
  header += std::string("\1\0\0\0", 4);      // t = 1
  header += std::string("\x10\0\0\0", 4);    // frame_count = 16
  testing::spit(dir / "z.arf", header);
  EXPECT_THROW(read_feature_file(dir / "z.arf"), FormatError);
}

TEST(FeatureFile, MissingFileIsIoError) {
  TempDir dir;
  EXPECT_THROW(read_feature_file(dir / "nope.arf"), IoError);
}

TEST(ValidateBag, FrameCountMustCoverClips) {
  auto b = two_by_one();
  b.frame_count = 0;
  EXPECT_THROW(validate_bag(b), std::invalid_argument);
  b.frame_count = 17;
  EXPECT_THROW(validate_bag(b), std::invalid_argument);
  b.frame_count = 1;
  EXPECT_NO_THROW(validate_bag(b));
  b.frame_count = 16;
  b.frame_truth = std::vector<std::uint8_t>(15, 0);
  EXPECT_THROW(validate_bag(b), std::invalid_argument);
  b.frame_truth = std::vector<std::uint8_t>(16, 0);
  EXPECT_NO_THROW(validate_bag(b));
}

TEST(Expand, TwoClipsThirtyTwoFrames) {
  const std::vector<double> s{0.2, 0.9};
  const auto f = expand_clip_scores_to_frames(s, 32);
  ASSERT_EQ(f.size(), 32u);
  for (int j = 0; j < 16; ++j) EXPECT_EQ(f[j], 0.2);
  for (int j = 16; j < 32; ++j) EXPECT_EQ(f[j], 0.9);
}

TEST(Expand, TrailingFramesClampToLastClip) {
  const std::vector<double> s{0.2, 0.9};
  const auto f = expand_clip_scores_to_frames(s, 35);
  ASSERT_EQ(f.size(), 35u);
  for (int j = 0; j < 16; ++j) EXPECT_EQ(f[j], 0.2);
  for (int j = 16; j < 35; ++j) EXPECT_EQ(f[j], 0.9);
}

TEST(Expand, SingleClip) {
  const std::vector<double> s{0.7};
  const auto f = expand_clip_scores_to_frames(s, 5);
  EXPECT_EQ(f, std::vector<double>(5, 0.7));
}

TEST(Expand, LengthAndValuesProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng.index(10));
    for (auto& v : s) v = rng.uniform01();
    const auto n = static_cast<std::uint32_t>(1 + rng.index(300));
    const auto f = expand_clip_scores_to_frames(s, n);
    ASSERT_EQ(f.size(), n);
    for (double v : f) ASSERT_NE(std::find(s.begin(), s.end(), v), s.end());
  }
}

TEST(Expand, RejectsEmptyInputs) {
  const std::vector<double> none;
  EXPECT_THROW(expand_clip_scores_to_frames(none, 4), std::invalid_argument);
  const std::vector<double> one{0.5};
  EXPECT_THROW(expand_clip_scores_to_frames(one, 0), std::invalid_argument);
}

TEST(TruthFile, RoundTripAndFormat) {
  TempDir dir;
  const std::vector<std::uint8_t> truth{0, 0, 1, 1, 0};
  write_truth_file(truth, dir / "t.txt");
  EXPECT_EQ(testing::slurp(dir / "t.txt"), "00110\n");
  EXPECT_EQ(read_truth_file(dir / "t.txt"), truth);
  testing::spit(dir / "bad.txt", "0120\n");
  EXPECT_THROW(read_truth_file(dir / "bad.txt"), FormatError);
}

TEST(Manifest, WriteReadRoundTripWithRelativePaths) {
  TempDir dir;
  SyntheticSpec spec;
  spec.feature_dim = 4;
  spec.n_normal = 2;
  spec.n_abnormal = 3;
  spec.min_clips = 2;
  spec.max_clips = 5;
  spec.seed = 3;
  const auto data = generate_synthetic_dataset(spec);
  auto manifest = write_bags(data.train, dir.path());
  write_manifest(manifest, dir / "manifest.csv");

  const auto text = testing::slurp(dir / "manifest.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "video_id,label,feature_path,frame_count,truth_path");
  EXPECT_EQ(text.find(dir.path().string()), std::string::npos);

  auto back = read_manifest(dir / "manifest.csv");
  ASSERT_EQ(back.entries.size(), 5u);
  EXPECT_EQ(back.count(VideoLabel::normal), 2u);
  EXPECT_EQ(back.count(VideoLabel::anomalous), 3u);
  const auto bags = load_bags(back);
  EXPECT_EQ(back.feature_dim, 4u);
  ASSERT_EQ(bags.size(), data.train.size());
  for (std::size_t i = 0; i < bags.size(); ++i) {
    EXPECT_EQ(bags[i].video_id, data.train[i].video_id);
    EXPECT_EQ(bags[i].label, data.train[i].label);
    EXPECT_EQ(bags[i].features, data.train[i].features);
    EXPECT_EQ(bags[i].frame_truth, data.train[i].frame_truth);
  }
}

TEST(Manifest, DuplicateIdsRejected) {
  TempDir dir;
  testing::spit(dir / "m.csv",
                "video_id,label,feature_path,frame_count,truth_path\n"
                "a,0,a.arf,16,\n"
                "a,1,b.arf,16,\n");
  EXPECT_THROW(read_manifest(dir / "m.csv"), FormatError);
}

TEST(Manifest, MalformedRowsRejected) {
  TempDir dir;
  testing::spit(dir / "m.csv", "video_id,label,feature_path,frame_count,truth_path\na,2,a.arf,16,\n");
  EXPECT_THROW(read_manifest(dir / "m.csv"), FormatError);
  testing::spit(dir / "h.csv", "id,label\n");
  EXPECT_THROW(read_manifest(dir / "h.csv"), FormatError);
}

TEST(Manifest, MixedDimensionsRejected) {
  TempDir dir;
  auto a = two_by_one();
  a.video_id = "a";
  FeatureBag b;
  b.video_id = "b";
  b.features = Eigen::MatrixXf::Ones(3, 1);
  b.frame_count = 16;
  b.label = VideoLabel::anomalous;
  const std::vector<FeatureBag> bags{a, b};
  auto m = write_bags(bags, dir.path());
  EXPECT_THROW(load_bags(m), ShapeError);
}

TEST(Manifest, RequireBothClasses) {
  std::vector<FeatureBag> bags{two_by_one()};
  EXPECT_THROW(require_both_classes(bags), std::invalid_argument);
  bags.push_back(two_by_one());
  bags.back().label = VideoLabel::anomalous;
  EXPECT_NO_THROW(require_both_classes(bags));
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.feature_dim = 8;
  s.n_normal = 2;
  s.n_abnormal = 2;
  s.min_clips = 4;
  s.max_clips = 12;
  s.seed = 7;
  return s;
}

TEST(Synthetic, SameSeedGivesByteIdenticalFiles) {
  TempDir a, b;
  write_bags(generate_synthetic_dataset(small_spec()).train, a.path());
  write_bags(generate_synthetic_dataset(small_spec()).train, b.path());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    EXPECT_EQ(testing::slurp(e.path()), testing::slurp(b.path() / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 8u);
}

TEST(Synthetic, DifferentSeedsDiffer) {
  auto s = small_spec();
  const auto x = generate_synthetic_dataset(s);
  s.seed = 8;
  const auto y = generate_synthetic_dataset(s);
  EXPECT_FALSE(x.train[0].features.cols() == y.train[0].features.cols() &&
               x.train[0].features == y.train[0].features);
}

TEST(Synthetic, FullSpanMarksEveryAbnormalClip) {
  auto s = small_spec();
  s.anomaly_span_fraction = 1.0;
  for (const auto& b : generate_synthetic_dataset(s).train) {
    const auto& truth = *b.frame_truth;
    const bool all = std::all_of(truth.begin(), truth.end(), [](auto v) { return v == 1; });
    const bool none = std::all_of(truth.begin(), truth.end(), [](auto v) { return v == 0; });
    EXPECT_TRUE(b.label == VideoLabel::anomalous ? all : none) << b.video_id;
  }
}

TEST(Synthetic, SpanIsContiguousAndSized) {
  auto s = small_spec();
  s.n_abnormal = 20;
  s.anomaly_span_fraction = 0.3;
  for (const auto& b : generate_synthetic_dataset(s).train) {
    if (b.label != VideoLabel::anomalous) continue;
    const auto& truth = *b.frame_truth;
    ASSERT_EQ(truth.size(), 16u * static_cast<std::size_t>(b.clip_count()));
    const auto first = std::find(truth.begin(), truth.end(), 1);
    const auto last = std::find(first, truth.end(), 0);
    EXPECT_TRUE(std::all_of(last, truth.end(), [](auto v) { return v == 0; }));
    const auto span_frames = static_cast<std::size_t>(last - first);
    const auto clips = static_cast<std::size_t>(std::ceil(0.3 * static_cast<double>(b.clip_count())));
    EXPECT_EQ(span_frames, 16 * clips);
    EXPECT_EQ(static_cast<std::size_t>(first - truth.begin()) % 16, 0u);
  }
}

TEST(Synthetic, LabelMatchesTruthWithoutNoise) {
  auto s = small_spec();
  s.n_normal = 15;
  s.n_abnormal = 15;
  s.n_test_normal = 5;
  s.n_test_abnormal = 5;
  const auto d = generate_synthetic_dataset(s);
  for (const auto* split : {&d.train, &d.test}) {
    for (const auto& b : *split) {
      const auto& t = *b.frame_truth;
      const bool any = std::any_of(t.begin(), t.end(), [](auto v) { return v != 0; });
      EXPECT_EQ(b.label == VideoLabel::anomalous, any) << b.video_id;
    }
  }
  EXPECT_EQ(d.test.size(), 10u);
}

TEST(Synthetic, LabelNoiseFlipsLabelsButNotTruth) {
  auto s = small_spec();
  s.n_normal = 200;
  s.n_abnormal = 200;
  s.n_test_normal = 50;
  s.n_test_abnormal = 50;
  s.label_noise_rate = 0.25;
  const auto d = generate_synthetic_dataset(s);
  int flipped = 0;
  for (const auto& b : d.train) {
    const auto& t = *b.frame_truth;
    const bool any = std::any_of(t.begin(), t.end(), [](auto v) { return v != 0; });
    if ((b.label == VideoLabel::anomalous) != any) ++flipped;
  }
  EXPECT_NEAR(flipped / 400.0, 0.25, 0.07);
  for (const auto& b : d.test) {
    const auto& t = *b.frame_truth;
    const bool any = std::any_of(t.begin(), t.end(), [](auto v) { return v != 0; });
    EXPECT_EQ(b.label == VideoLabel::anomalous, any);
  }
}

TEST(Synthetic, ShapesAndCountsMatchRequest) {
  auto s = small_spec();
  const auto d = generate_synthetic_dataset(s);
  ASSERT_EQ(d.train.size(), 4u);
  for (const auto& b : d.train) {
    EXPECT_EQ(b.feature_dim(), 8);
    EXPECT_GE(b.clip_count(), 4);
    EXPECT_LE(b.clip_count(), 12);
    EXPECT_EQ(b.frame_count, 16u * static_cast<std::uint32_t>(b.clip_count()));
    EXPECT_NO_THROW(validate_bag(b));
  }
}

TEST(Synthetic, InvalidSpecRejected) {
  auto s = small_spec();
  s.feature_dim = 0;
  EXPECT_THROW(validate_synthetic_spec(s), std::invalid_argument);
  s = small_spec();
  s.min_clips = 10;
  s.max_clips = 5;
  EXPECT_THROW(validate_synthetic_spec(s), std::invalid_argument);
  s = small_spec();
  s.anomaly_span_fraction = 0.0;
  EXPECT_THROW(validate_synthetic_spec(s), std::invalid_argument);
  s = small_spec();
  s.label_noise_rate = 1.5;
  EXPECT_THROW(validate_synthetic_spec(s), std::invalid_argument);
}

}  // namespace
}  // namespace arnet
