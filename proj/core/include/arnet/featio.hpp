#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace arnet {

/// Frames per clip; features are extracted from non-overlapping 16-frame clips.
inline constexpr std::uint32_t kFramesPerClip = 16;

enum class VideoLabel : std::uint8_t { normal = 0, anomalous = 1 };

inline int label_value(VideoLabel y) { return static_cast<int>(y); }

/// One video: its clip features (F x t, column j is clip j), the weak
/// video-level label, and per-frame ground truth when known.
struct FeatureBag {
  std::string video_id;
  Eigen::MatrixXf features;
  VideoLabel label = VideoLabel::normal;
  std::uint32_t frame_count = 0;
  std::optional<std::vector<std::uint8_t>> frame_truth;

  Eigen::Index feature_dim() const { return features.rows(); }
  Eigen::Index clip_count() const { return features.cols(); }
};

/// Throws std::invalid_argument naming the broken invariant.
void validate_bag(const FeatureBag& bag);

// Binary feature file: "ARNETF01", then F, t, frame_count as u32 LE, then
// F*t float32 LE values clip by clip.
void write_feature_file(const FeatureBag& bag, const std::filesystem::path& path);

/// Label is normal and frame_truth is unset on return.
FeatureBag read_feature_file(const std::filesystem::path& path);

/// One ASCII '0'/'1' per frame followed by a newline.
void write_truth_file(std::span<const std::uint8_t> truth,
                      const std::filesystem::path& path);
std::vector<std::uint8_t> read_truth_file(const std::filesystem::path& path);

/// Frame j takes the score of clip j/16; frames past the last full clip
/// reuse the last clip's score.
std::vector<double> expand_clip_scores_to_frames(std::span<const double> clip_scores,
                                                 std::uint32_t frame_count);

struct ManifestEntry {
  std::string video_id;
  VideoLabel label = VideoLabel::normal;
  std::filesystem::path feature_path;
  std::uint32_t frame_count = 0;
  std::optional<std::filesystem::path> truth_path;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  // Zero until the referenced feature files have been inspected.
  std::uint32_t feature_dim = 0;

  std::size_t count(VideoLabel label) const;
};

/// CSV with header `video_id,label,feature_path,frame_count,truth_path`.
/// Relative paths are resolved against the manifest's directory. Duplicate
/// ids and malformed rows raise FormatError.
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Paths are written relative to the manifest's directory when possible.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Reads every referenced feature (and truth) file in manifest order and
/// checks that all share one feature dimension, which is stored back into
/// the manifest.
std::vector<FeatureBag> load_bags(DatasetManifest& manifest);

/// Throws std::invalid_argument if either label class is absent.
void require_both_classes(std::span<const FeatureBag> bags);

/// Parameters of the synthetic weakly-labelled benchmark.
///
/// Normal clips are drawn from N(mu0, noise_scale^2 I). An anomalous video
/// holds a contiguous run of ceil(anomaly_span_fraction * t) clips drawn
/// from N(mu1, noise_scale^2 I) with |mu1 - mu0| = class_separation *
/// noise_scale; its other clips come from the normal distribution.
struct SyntheticSpec {
  std::uint32_t feature_dim = 32;
  std::uint32_t n_normal = 20;
  std::uint32_t n_abnormal = 20;
  std::uint32_t min_clips = 32;
  std::uint32_t max_clips = 96;
  double anomaly_span_fraction = 0.3;
  double class_separation = 4.0;
  double label_noise_rate = 0.0;
  std::uint64_t seed = 0;
  // Held-out videos drawn around the same class centers. Never label-flipped.
  std::uint32_t n_test_normal = 0;
  std::uint32_t n_test_abnormal = 0;
};

void validate_synthetic_spec(const SyntheticSpec& spec);

struct SyntheticDataset {
  std::vector<FeatureBag> train;
  std::vector<FeatureBag> test;
};

/// Deterministic for a fixed spec. Every bag carries frame_truth and
/// frame_count = 16 * t. Training labels are flipped with probability
/// label_noise_rate; frame_truth is never altered.
SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec);

/// Writes features/<id>.arf and truth/<id>.txt for every bag under
/// `directory` and returns the matching manifest (not yet saved).
DatasetManifest write_bags(std::span<const FeatureBag> bags,
                           const std::filesystem::path& directory);

}  // namespace arnet
