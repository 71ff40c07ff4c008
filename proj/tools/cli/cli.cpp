#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "arnet/errors.hpp"
#include "arnet/eval.hpp"
#include "arnet/featio.hpp"
#include "arnet/format.hpp"
#include "arnet/netcore.hpp"
#include "arnet/trainer.hpp"

namespace fs = std::filesystem;

namespace arnet::cli {
namespace {

/// Thrown for invalid flag values found after CLI11 parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tracks what a command creates so a failed run can remove it again.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;

  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) fs::remove_all(*it, ec);
  }

  /// Creates `dir` (and parents) if needed; tracks only the directories it
  /// actually created.
  void ensure_directory(const fs::path& dir) {
    std::vector<fs::path> missing;
    for (fs::path p = dir; !p.empty() && !fs::exists(p); p = p.parent_path()) {
      missing.push_back(p);
      if (p == p.parent_path()) break;
    }
    fs::create_directories(dir);
    for (auto it = missing.rbegin(); it != missing.rend(); ++it) created_.push_back(*it);
  }

  void track(const fs::path& p) { created_.push_back(p); }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> created_;
  bool committed_ = false;
};

using Echo = std::vector<std::pair<std::string, std::string>>;

void write_echo(const Echo& echo, const fs::path& path, OutputGuard& guard) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  guard.track(path);
  for (const auto& [k, v] : echo) file << k << '=' << v << '\n';
  if (!file) throw IoError("cannot write " + path.string());
}

/// Training flags shared by `train` and `sweep`.
struct TrainFlags {
  TrainingConfig config;
  std::string loss_mode = "dmil_plus_center";

  void attach(CLI::App& app) {
    app.add_option("--alpha", config.alpha, "Top-k divisor: k = ceil(t / alpha)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--lambda", config.lambda, "Center-loss weight")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    app.add_option("--lr,--learning-rate", config.learning_rate, "Adam learning rate")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--dropout", config.dropout_p, "Dropout probability of the FC layer")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 0.999999));
    app.add_option("--batch-normal", config.batch_normal, "Normal videos per batch")
        ->capture_default_str()
        ->check(CLI::Range(1u, 1000000u));
    app.add_option("--batch-abnormal", config.batch_abnormal, "Anomalous videos per batch")
        ->capture_default_str()
        ->check(CLI::Range(1u, 1000000u));
    app.add_option("--epochs", config.epochs, "Training epochs")->capture_default_str();
    app.add_option("--iterations-per-epoch", config.iterations_per_epoch, "Batches per epoch")
        ->capture_default_str()
        ->check(CLI::Range(1u, 1000000000u));
    app.add_option("--loss-mode", loss_mode, "kmax-baseline | dmil | dmil-plus-center")
        ->capture_default_str();
    app.add_option("--adam-beta1", config.adam_beta1)->capture_default_str();
    app.add_option("--adam-beta2", config.adam_beta2)->capture_default_str();
    app.add_option("--adam-epsilon", config.adam_epsilon)->capture_default_str();
  }

  TrainingConfig resolve(std::uint64_t seed) {
    try {
      config.loss_mode = parse_loss_mode(loss_mode);
      config.seed = seed;
      validate_config(config);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return config;
  }
};

void echo_training(const TrainingConfig& c, Echo& echo) {
  echo.emplace_back("alpha", format_real(c.alpha));
  echo.emplace_back("lambda", format_real(c.lambda));
  echo.emplace_back("learning_rate", format_real(c.learning_rate));
  echo.emplace_back("dropout", format_real(c.dropout_p));
  echo.emplace_back("batch_normal", std::to_string(c.batch_normal));
  echo.emplace_back("batch_abnormal", std::to_string(c.batch_abnormal));
  echo.emplace_back("epochs", std::to_string(c.epochs));
  echo.emplace_back("iterations_per_epoch", std::to_string(c.iterations_per_epoch));
  echo.emplace_back("loss_mode", std::string(to_string(c.loss_mode)));
  echo.emplace_back("adam_beta1", format_real(c.adam_beta1));
  echo.emplace_back("adam_beta2", format_real(c.adam_beta2));
  echo.emplace_back("adam_epsilon", format_real(c.adam_epsilon));
  echo.emplace_back("seed", std::to_string(c.seed));
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw UsageError(what + " not found: " + path);
}

/// Loads a manifest and its bags; `need_truth` lists every video without a
/// truth file in one error.
std::vector<FeatureBag> load_dataset(const std::string& path, bool need_truth,
                                     std::uint32_t* feature_dim = nullptr) {
  DatasetManifest manifest = read_manifest(path);
  if (manifest.entries.empty()) throw FormatError(path + ": manifest has no entries");
  if (need_truth) {
    std::string missing;
    for (const auto& e : manifest.entries) {
      if (!e.truth_path) missing += (missing.empty() ? "" : ", ") + e.video_id;
    }
    if (!missing.empty()) {
      throw std::invalid_argument(path + ": missing truth files for videos: " + missing);
    }
  }
  auto bags = load_bags(manifest);
  if (feature_dim) *feature_dim = manifest.feature_dim;
  return bags;
}

// ---------------------------------------------------------------- synth

struct SynthCommand {
  SyntheticSpec spec;
  std::string out;
  bool overwrite = false;

  void attach(CLI::App& app) {
    app.add_option("--normal", spec.n_normal, "Normal training videos")
        ->capture_default_str()
        ->check(CLI::Range(1u, 10000000u));
    app.add_option("--abnormal", spec.n_abnormal, "Anomalous training videos")
        ->capture_default_str()
        ->check(CLI::Range(1u, 10000000u));
    app.add_option("--test-normal", spec.n_test_normal, "Held-out normal videos")->capture_default_str();
    app.add_option("--test-abnormal", spec.n_test_abnormal, "Held-out anomalous videos")
        ->capture_default_str();
    app.add_option("--dim", spec.feature_dim, "Feature dimension F")
        ->capture_default_str()
        ->check(CLI::Range(1u, 65536u));
    app.add_option("--min-clips", spec.min_clips)->capture_default_str()->check(CLI::Range(1u, 1000000u));
    app.add_option("--max-clips", spec.max_clips)->capture_default_str()->check(CLI::Range(1u, 1000000u));
    app.add_option("--span", spec.anomaly_span_fraction, "Anomalous fraction of an anomalous video")
        ->capture_default_str();
    app.add_option("--separation", spec.class_separation, "Class-center distance in noise units")
        ->capture_default_str();
    app.add_option("--label-noise", spec.label_noise_rate, "Training label flip probability")
        ->capture_default_str();
    app.add_option("--out", out, "Output directory")->required();
    app.add_flag("--overwrite", overwrite, "Replace an existing dataset in --out");
  }

  int run(std::uint64_t seed, std::ostream& os) {
    spec.seed = seed;
    try {
      validate_synthetic_spec(spec);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const fs::path dir(out);
    if (fs::exists(dir) && !fs::is_directory(dir)) throw UsageError("--out is not a directory: " + out);
    if (fs::exists(dir) && !fs::is_empty(dir)) {
      if (!overwrite) {
        throw UsageError("output directory " + out + " is not empty (pass --overwrite to replace)");
      }
      for (const char* stale : {"features", "truth", "manifest.csv", "test_manifest.csv",
                                "resolved_config.txt"}) {
        fs::remove_all(dir / stale);
      }
    }

    OutputGuard guard;
    guard.ensure_directory(dir);
    Echo echo{{"command", "synth"},
              {"dim", std::to_string(spec.feature_dim)},
              {"normal", std::to_string(spec.n_normal)},
              {"abnormal", std::to_string(spec.n_abnormal)},
              {"test_normal", std::to_string(spec.n_test_normal)},
              {"test_abnormal", std::to_string(spec.n_test_abnormal)},
              {"min_clips", std::to_string(spec.min_clips)},
              {"max_clips", std::to_string(spec.max_clips)},
              {"span", format_real(spec.anomaly_span_fraction)},
              {"separation", format_real(spec.class_separation)},
              {"label_noise", format_real(spec.label_noise_rate)},
              {"seed", std::to_string(spec.seed)}};
    write_echo(echo, dir / "resolved_config.txt", guard);

    const SyntheticDataset data = generate_synthetic_dataset(spec);
    guard.track(dir / "features");
    guard.track(dir / "truth");
    std::vector<FeatureBag> all = data.train;
    all.insert(all.end(), data.test.begin(), data.test.end());
    const DatasetManifest written = write_bags(all, dir);

    DatasetManifest train_manifest;
    DatasetManifest test_manifest;
    for (const auto& e : written.entries) {
      const bool is_test = e.video_id.rfind("test_", 0) == 0;
      (is_test ? test_manifest : train_manifest).entries.push_back(e);
    }
    guard.track(dir / "manifest.csv");
    write_manifest(train_manifest, dir / "manifest.csv");
    if (!test_manifest.entries.empty()) {
      guard.track(dir / "test_manifest.csv");
      write_manifest(test_manifest, dir / "test_manifest.csv");
    }
    guard.commit();
    os << (dir / "manifest.csv").string() << '\n';
    if (!test_manifest.entries.empty()) os << (dir / "test_manifest.csv").string() << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------- train

struct TrainCommand {
  TrainFlags flags;
  std::string manifest;
  std::string validation;
  std::string out;

  void attach(CLI::App& app) {
    app.add_option("--manifest", manifest, "Training manifest CSV")->required();
    app.add_option("--validation", validation, "Manifest with frame truth, scored after each epoch");
    app.add_option("--out", out, "Output directory")->required();
    flags.attach(app);
  }

  int run(std::uint64_t seed, std::ostream& os) {
    const TrainingConfig config = flags.resolve(seed);
    require_file(manifest, "manifest");
    if (!validation.empty()) require_file(validation, "validation manifest");

    OutputGuard guard;
    const fs::path dir(out);
    guard.ensure_directory(dir);
    Echo echo{{"command", "train"}, {"manifest", manifest}};
    if (!validation.empty()) echo.emplace_back("validation", validation);
    echo_training(config, echo);
    write_echo(echo, dir / "resolved_config.txt", guard);

    const auto bags = load_dataset(manifest, false);
    require_both_classes(bags);
    std::vector<FeatureBag> val_bags;
    if (!validation.empty()) val_bags = load_dataset(validation, true);

    const TrainingResult result = train(bags, config, val_bags);

    guard.track(dir / "checkpoint.arw");
    save_checkpoint(result.params, dir / "checkpoint.arw");
    guard.track(dir / "history.csv");
    write_history_csv(result.history, dir / "history.csv");
    if (!val_bags.empty()) {
      guard.track(dir / "validation.csv");
      write_validation_csv(result.history, dir / "validation.csv");
    }
    guard.commit();
    os << (dir / "checkpoint.arw").string() << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------- eval

struct EvalCommand {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  double threshold = 0.5;

  void attach(CLI::App& app) {
    app.add_option("--checkpoint", checkpoint, "Parameter checkpoint")->required();
    app.add_option("--manifest", manifest, "Test manifest with truth files")->required();
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--threshold", threshold, "False-alarm threshold")->capture_default_str();
  }

  int run(std::uint64_t, std::ostream& os) {
    require_file(checkpoint, "checkpoint");
    require_file(manifest, "manifest");

    OutputGuard guard;
    const fs::path dir(out);
    guard.ensure_directory(dir);
    write_echo({{"command", "eval"},
                {"checkpoint", checkpoint},
                {"manifest", manifest},
                {"threshold", format_real(threshold)}},
               dir / "resolved_config.txt", guard);

    const ModelParameters params = load_checkpoint(checkpoint);
    std::uint32_t dim = 0;
    const auto bags = load_dataset(manifest, true, &dim);
    if (dim != params.feature_dim()) {
      throw ShapeError("dimension mismatch: checkpoint feature_dim " +
                       std::to_string(params.feature_dim()) + " vs manifest feature_dim " +
                       std::to_string(dim));
    }
    EvaluationReport report = evaluate(params, bags, threshold);
    report.config_echo.emplace_back("feature_dim", std::to_string(dim));

    guard.track(dir / "summary.csv");
    guard.track(dir / "traces");
    write_report(report, dir);
    guard.commit();
    os << "auc," << format_real(report.auc) << "\nfar," << format_real(report.far) << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------- sweep

struct SweepCommand {
  TrainFlags flags;
  std::string manifest;
  std::string test_manifest;
  std::string out;
  std::vector<double> alphas;
  double threshold = 0.5;

  void attach(CLI::App& app) {
    app.add_option("--manifest", manifest, "Training manifest")->required();
    app.add_option("--test-manifest", test_manifest, "Test manifest with truth files")->required();
    app.add_option("--alphas", alphas, "Comma-separated alpha values")->delimiter(',')->required();
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--threshold", threshold)->capture_default_str();
    flags.attach(app);
  }

  int run(std::uint64_t seed, std::ostream& os) {
    if (alphas.empty()) throw UsageError("--alphas needs at least one value");
    for (double a : alphas) {
      if (!(a > 0.0)) throw UsageError("alpha values must be positive");
    }
    const TrainingConfig config = flags.resolve(seed);
    require_file(manifest, "manifest");
    require_file(test_manifest, "test manifest");

    OutputGuard guard;
    const fs::path dir(out);
    guard.ensure_directory(dir);
    Echo echo{{"command", "sweep"}, {"manifest", manifest}, {"test_manifest", test_manifest}};
    std::string alpha_list;
    for (double a : alphas) alpha_list += (alpha_list.empty() ? "" : ",") + format_real(a);
    echo.emplace_back("alphas", alpha_list);
    echo.emplace_back("threshold", format_real(threshold));
    echo_training(config, echo);
    write_echo(echo, dir / "resolved_config.txt", guard);

    const auto train_bags = load_dataset(manifest, false);
    const auto test_bags = load_dataset(test_manifest, true);
    const auto rows = sweep_alpha(train_bags, test_bags, config, alphas, threshold);

    guard.track(dir / "sweep.csv");
    write_sweep_csv(rows, dir / "sweep.csv");
    guard.commit();
    os << (dir / "sweep.csv").string() << '\n';
    return kExitOk;
  }
};

/// Inserts flags from `--config <file>` right after the subcommand so
/// explicit command-line flags (parsed later) take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> config_path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
      config_path = args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      config_path = a.substr(9);
    } else {
      rest.push_back(a);
    }
  }
  if (!config_path) return rest;
  if (rest.empty()) throw UsageError("--config given without a command");
  auto from_file = config_file_to_flags(*config_path);
  std::vector<std::string> merged{rest.front()};
  merged.insert(merged.end(), from_file.begin(), from_file.end());
  merged.insert(merged.end(), rest.begin() + 1, rest.end());
  return merged;
}

}  // namespace

std::vector<std::string> config_file_to_flags(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::string> flags;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(path + ":" + std::to_string(line_no) + ": empty key");
    if (key == "command" || key == "config") continue;
    std::replace(key.begin(), key.end(), '_', '-');
    flags.push_back("--" + key + "=" + value);
  }
  return flags;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weakly supervised video anomaly scoring: synthesize, train, evaluate, sweep"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::uint64_t seed = 0;
  SynthCommand synth;
  TrainCommand train_cmd;
  EvalCommand eval_cmd;
  SweepCommand sweep;

  auto add_common = [&](CLI::App* sub) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--seed", seed, "Base seed for every random stream")->capture_default_str();
    // Consumed before parsing; registered so it shows in --help.
    sub->add_option("--config", "Flat key=value file; command-line flags override it");
  };
  auto* synth_app = app.add_subcommand("synth", "Generate a synthetic weakly labelled dataset");
  add_common(synth_app);
  synth.attach(*synth_app);
  auto* train_app = app.add_subcommand("train", "Train a model from a manifest");
  add_common(train_app);
  train_cmd.attach(*train_app);
  auto* eval_app = app.add_subcommand("eval", "Frame-level AUC/FAR of a checkpoint");
  add_common(eval_app);
  eval_cmd.attach(*eval_app);
  auto* sweep_app = app.add_subcommand("sweep", "Train and evaluate once per alpha");
  add_common(sweep_app);
  sweep.attach(*sweep_app);

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (synth_app->parsed()) return synth.run(seed, out);
    if (train_app->parsed()) return train_cmd.run(seed, out);
    if (eval_app->parsed()) return eval_cmd.run(seed, out);
    if (sweep_app->parsed()) return sweep.run(seed, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace arnet::cli
