#include "arnet/featio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "arnet/errors.hpp"
#include "arnet/rng.hpp"
#include "binary_io.hpp"

namespace fs = std::filesystem;

namespace arnet {
namespace {

constexpr std::string_view kFeatureMagic = "ARNETF01";
constexpr std::size_t kFeatureHeaderBytes = 8 + 3 * 4;
constexpr std::string_view kManifestHeader = "video_id,label,feature_path,frame_count,truth_path";

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  // A trailing empty column is dropped by getline.
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <typename T>
T parse_unsigned(const std::string& text, const std::string& what) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw FormatError("invalid " + what + ": '" + text + "'");
  }
  return value;
}

std::string relative_or_absolute(const fs::path& target, const fs::path& base) {
  std::error_code ec;
  auto rel = fs::relative(target, base, ec);
  if (ec || rel.empty()) return target.generic_string();
  return rel.generic_string();
}

}  // namespace

void validate_bag(const FeatureBag& bag) {
  const auto f = bag.feature_dim();
  const auto t = bag.clip_count();
  if (f < 1 || t < 1) throw std::invalid_argument("bag '" + bag.video_id + "' has an empty feature matrix");
  if (!bag.features.allFinite()) {
    throw std::invalid_argument("bag '" + bag.video_id + "' contains a non-finite feature value");
  }
  const auto lo = static_cast<std::uint64_t>(kFramesPerClip) * static_cast<std::uint64_t>(t - 1) + 1;
  const auto hi = static_cast<std::uint64_t>(kFramesPerClip) * static_cast<std::uint64_t>(t);
  if (bag.frame_count < lo || bag.frame_count > hi) {
    throw std::invalid_argument("bag '" + bag.video_id + "': frame_count " +
                                std::to_string(bag.frame_count) + " inconsistent with " +
                                std::to_string(t) + " clips");
  }
  if (bag.frame_truth && bag.frame_truth->size() != bag.frame_count) {
    throw std::invalid_argument("bag '" + bag.video_id + "': frame_truth length " +
                                std::to_string(bag.frame_truth->size()) + " != frame_count " +
                                std::to_string(bag.frame_count));
  }
}

void write_feature_file(const FeatureBag& bag, const fs::path& path) {
  validate_bag(bag);
  std::string bytes;
  bytes.reserve(kFeatureHeaderBytes + 4 * static_cast<std::size_t>(bag.features.size()));
  bytes.append(kFeatureMagic);
  detail::put_u32(bytes, static_cast<std::uint32_t>(bag.feature_dim()));
  detail::put_u32(bytes, static_cast<std::uint32_t>(bag.clip_count()));
  detail::put_u32(bytes, bag.frame_count);
  // Eigen's default storage is column-major, i.e. clip by clip.
  for (Eigen::Index i = 0; i < bag.features.size(); ++i) {
    detail::put_f32(bytes, bag.features.data()[i]);
  }
  detail::write_file_bytes(path, bytes);
}

FeatureBag read_feature_file(const fs::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < kFeatureHeaderBytes) {
    throw FormatError(path.string() + ": truncated header");
  }
  detail::ByteReader reader(bytes);
  if (reader.take(kFeatureMagic.size()) != kFeatureMagic) {
    throw FormatError(path.string() + ": bad magic");
  }
  const std::uint32_t f = reader.u32();
  const std::uint32_t t = reader.u32();
  const std::uint32_t frame_count = reader.u32();
  if (f == 0 || t == 0) throw FormatError(path.string() + ": zero feature dimension or clip count");

  const std::uint64_t expected = kFeatureHeaderBytes + 4ULL * f * t;
  if (bytes.size() < expected) throw FormatError(path.string() + ": truncated feature data");
  if (bytes.size() > expected) throw FormatError(path.string() + ": trailing bytes after feature data");

  FeatureBag bag;
  bag.video_id = path.stem().string();
  bag.frame_count = frame_count;
  bag.features.resize(f, t);
  for (Eigen::Index i = 0; i < bag.features.size(); ++i) bag.features.data()[i] = reader.f32();
  return bag;
}

void write_truth_file(std::span<const std::uint8_t> truth, const fs::path& path) {
  std::string text;
  text.reserve(truth.size() + 1);
  for (auto v : truth) text.push_back(v ? '1' : '0');
  text.push_back('\n');
  detail::write_file_bytes(path, text);
}

std::vector<std::uint8_t> read_truth_file(const fs::path& path) {
  const std::string text = detail::read_file_bytes(path);
  std::vector<std::uint8_t> truth;
  truth.reserve(text.size());
  for (char c : text) {
    if (c == '0' || c == '1') {
      truth.push_back(static_cast<std::uint8_t>(c - '0'));
    } else if (c != '\n' && c != '\r') {
      throw FormatError(path.string() + ": truth files may only contain 0/1 characters");
    }
  }
  return truth;
}

std::vector<double> expand_clip_scores_to_frames(std::span<const double> clip_scores,
                                                 std::uint32_t frame_count) {
  if (clip_scores.empty() || frame_count == 0) {
    throw std::invalid_argument("expand_clip_scores_to_frames: need at least one clip and one frame");
  }
  std::vector<double> frames(frame_count);
  const std::size_t last = clip_scores.size() - 1;
  for (std::uint32_t j = 0; j < frame_count; ++j) {
    frames[j] = clip_scores[std::min<std::size_t>(j / kFramesPerClip, last)];
  }
  return frames;
}

std::size_t DatasetManifest::count(VideoLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const auto& e) { return e.label == label; }));
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();

  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw FormatError(path.string() + ": expected header '" + std::string(kManifestHeader) + "'");
  }

  DatasetManifest manifest;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_row(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 5) throw FormatError(where + ": expected 5 columns");

    ManifestEntry entry;
    entry.video_id = fields[0];
    if (entry.video_id.empty()) throw FormatError(where + ": empty video_id");
    if (!seen.insert(entry.video_id).second) {
      throw FormatError(where + ": duplicate video_id '" + entry.video_id + "'");
    }
    if (fields[1] == "0") {
      entry.label = VideoLabel::normal;
    } else if (fields[1] == "1") {
      entry.label = VideoLabel::anomalous;
    } else {
      throw FormatError(where + ": label must be 0 or 1");
    }
    if (fields[2].empty()) throw FormatError(where + ": empty feature_path");
    fs::path feature_path(fields[2]);
    entry.feature_path = feature_path.is_absolute() ? feature_path : base / feature_path;
    entry.frame_count = parse_unsigned<std::uint32_t>(fields[3], "frame_count");
    if (!fields[4].empty()) {
      fs::path truth_path(fields[4]);
      entry.truth_path = truth_path.is_absolute() ? truth_path : base / truth_path;
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  std::string text(kManifestHeader);
  text.push_back('\n');
  for (const auto& e : manifest.entries) {
    text += e.video_id;
    text += ',';
    text += std::to_string(label_value(e.label));
    text += ',';
    text += relative_or_absolute(e.feature_path, base);
    text += ',';
    text += std::to_string(e.frame_count);
    text += ',';
    if (e.truth_path) text += relative_or_absolute(*e.truth_path, base);
    text += '\n';
  }
  detail::write_file_bytes(path, text);
}

std::vector<FeatureBag> load_bags(DatasetManifest& manifest) {
  std::vector<FeatureBag> bags;
  bags.reserve(manifest.entries.size());
  std::uint32_t dim = 0;
  for (const auto& entry : manifest.entries) {
    FeatureBag bag = read_feature_file(entry.feature_path);
    bag.video_id = entry.video_id;
    bag.label = entry.label;
    if (bag.frame_count != entry.frame_count) {
      throw FormatError("video '" + entry.video_id + "': manifest frame_count " +
                        std::to_string(entry.frame_count) + " != file frame_count " +
                        std::to_string(bag.frame_count));
    }
    const auto f = static_cast<std::uint32_t>(bag.feature_dim());
    if (dim == 0) {
      dim = f;
    } else if (f != dim) {
      throw ShapeError("video '" + entry.video_id + "' has feature dimension " + std::to_string(f) +
                        ", expected " + std::to_string(dim));
    }
    if (entry.truth_path) bag.frame_truth = read_truth_file(*entry.truth_path);
    try {
      validate_bag(bag);
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what());
    }
    bags.push_back(std::move(bag));
  }
  manifest.feature_dim = dim;
  return bags;
}

void require_both_classes(std::span<const FeatureBag> bags) {
  bool has_normal = false;
  bool has_anomalous = false;
  for (const auto& b : bags) {
    has_normal |= b.label == VideoLabel::normal;
    has_anomalous |= b.label == VideoLabel::anomalous;
  }
  if (!has_normal) throw std::invalid_argument("dataset has no normal (label 0) videos");
  if (!has_anomalous) throw std::invalid_argument("dataset has no anomalous (label 1) videos");
}

void validate_synthetic_spec(const SyntheticSpec& spec) {
  if (spec.feature_dim < 1) throw std::invalid_argument("synthetic feature_dim must be >= 1");
  if (spec.n_normal < 1 || spec.n_abnormal < 1) {
    throw std::invalid_argument("synthetic dataset needs at least one video of each class");
  }
  if (spec.min_clips < 1 || spec.max_clips < spec.min_clips) {
    throw std::invalid_argument("synthetic clip range must satisfy 1 <= min_clips <= max_clips");
  }
  if (!(spec.anomaly_span_fraction > 0.0 && spec.anomaly_span_fraction <= 1.0)) {
    throw std::invalid_argument("anomaly_span_fraction must lie in (0, 1]");
  }
  if (!(spec.class_separation >= 0.0) || !std::isfinite(spec.class_separation)) {
    throw std::invalid_argument("class_separation must be finite and >= 0");
  }
  if (!(spec.label_noise_rate >= 0.0 && spec.label_noise_rate < 1.0)) {
    throw std::invalid_argument("label_noise_rate must lie in [0, 1)");
  }
}

namespace {

struct ClassCenters {
  Eigen::VectorXd normal;
  Eigen::VectorXd anomalous;
};

ClassCenters draw_centers(const SyntheticSpec& spec) {
  Rng rng(derive_seed(spec.seed, "synth/centers"));
  const Eigen::Index f = spec.feature_dim;
  Eigen::VectorXd mu0(f);
  for (Eigen::Index i = 0; i < f; ++i) mu0[i] = rng.normal();
  Eigen::VectorXd direction(f);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < f; ++i) direction[i] = rng.normal();
    norm = direction.norm();
  } while (norm == 0.0);
  direction /= norm;
  return {mu0, mu0 + spec.class_separation * direction};
}

FeatureBag draw_video(const SyntheticSpec& spec, const ClassCenters& centers, bool anomalous,
                      const std::string& id, Rng& rng) {
  const std::uint32_t t =
      spec.min_clips + static_cast<std::uint32_t>(rng.index(spec.max_clips - spec.min_clips + 1));
  std::uint32_t span_begin = 0;
  std::uint32_t span_len = 0;
  if (anomalous) {
    span_len = static_cast<std::uint32_t>(std::ceil(spec.anomaly_span_fraction * t));
    span_len = std::clamp<std::uint32_t>(span_len, 1, t);
    span_begin = static_cast<std::uint32_t>(rng.index(t - span_len + 1));
  }

  FeatureBag bag;
  bag.video_id = id;
  bag.label = anomalous ? VideoLabel::anomalous : VideoLabel::normal;
  bag.frame_count = kFramesPerClip * t;
  bag.features.resize(spec.feature_dim, t);
  std::vector<std::uint8_t> truth(bag.frame_count, 0);
  for (std::uint32_t j = 0; j < t; ++j) {
    const bool in_span = j >= span_begin && j < span_begin + span_len;
    const Eigen::VectorXd& mu = in_span ? centers.anomalous : centers.normal;
    for (Eigen::Index i = 0; i < bag.features.rows(); ++i) {
      bag.features(i, j) = static_cast<float>(mu[i] + rng.normal());
    }
    if (in_span) {
      std::fill_n(truth.begin() + static_cast<std::ptrdiff_t>(j * kFramesPerClip), kFramesPerClip, 1);
    }
  }
  bag.frame_truth = std::move(truth);
  return bag;
}

std::vector<FeatureBag> draw_split(const SyntheticSpec& spec, const ClassCenters& centers,
                                   std::string_view split, std::uint32_t n_normal,
                                   std::uint32_t n_abnormal, double flip_rate) {
  Rng rng(derive_seed(spec.seed, std::string("synth/") + std::string(split)));
  std::vector<FeatureBag> bags;
  bags.reserve(n_normal + n_abnormal);
  char id[64];
  for (std::uint32_t i = 0; i < n_normal; ++i) {
    std::snprintf(id, sizeof(id), "%.*s_normal_%04u", static_cast<int>(split.size()), split.data(), i);
    bags.push_back(draw_video(spec, centers, false, id, rng));
  }
  for (std::uint32_t i = 0; i < n_abnormal; ++i) {
    std::snprintf(id, sizeof(id), "%.*s_abnormal_%04u", static_cast<int>(split.size()), split.data(), i);
    bags.push_back(draw_video(spec, centers, true, id, rng));
  }
  if (flip_rate > 0.0) {
    Rng flips(derive_seed(spec.seed, std::string("synth/") + std::string(split) + "/label_noise"));
    for (auto& bag : bags) {
      if (flips.bernoulli(flip_rate)) {
        bag.label = bag.label == VideoLabel::normal ? VideoLabel::anomalous : VideoLabel::normal;
      }
    }
  }
  return bags;
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  validate_synthetic_spec(spec);
  const ClassCenters centers = draw_centers(spec);
  SyntheticDataset data;
  data.train = draw_split(spec, centers, "train", spec.n_normal, spec.n_abnormal, spec.label_noise_rate);
  data.test = draw_split(spec, centers, "test", spec.n_test_normal, spec.n_test_abnormal, 0.0);
  return data;
}

DatasetManifest write_bags(std::span<const FeatureBag> bags, const fs::path& directory) {
  const fs::path feature_dir = directory / "features";
  const fs::path truth_dir = directory / "truth";
  fs::create_directories(feature_dir);
  DatasetManifest manifest;
  for (const auto& bag : bags) {
    ManifestEntry entry;
    entry.video_id = bag.video_id;
    entry.label = bag.label;
    entry.frame_count = bag.frame_count;
    entry.feature_path = feature_dir / (bag.video_id + ".arf");
    write_feature_file(bag, entry.feature_path);
    if (bag.frame_truth) {
      fs::create_directories(truth_dir);
      entry.truth_path = truth_dir / (bag.video_id + ".txt");
      write_truth_file(*bag.frame_truth, *entry.truth_path);
    }
    manifest.entries.push_back(std::move(entry));
    if (manifest.feature_dim == 0) manifest.feature_dim = static_cast<std::uint32_t>(bag.feature_dim());
  }
  return manifest;
}

}  // namespace arnet
