#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "arnet/featio.hpp"
#include "arnet/losses.hpp"
#include "arnet/netcore.hpp"
#include "arnet/rng.hpp"

namespace arnet {

/// Hyperparameters. Defaults follow the reference setup: alpha 4, lambda
/// 20, Adam at 1e-4, dropout 0.7, 30 normal + 30 anomalous videos per batch.
struct TrainingConfig {
  double alpha = 4.0;
  double lambda = 20.0;
  double learning_rate = 1e-4;
  double dropout_p = 0.7;
  std::uint32_t batch_normal = 30;
  std::uint32_t batch_abnormal = 30;
  // One epoch is `iterations_per_epoch` sampled batches; validation (when
  // supplied) runs after each epoch.
  std::uint32_t epochs = 200;
  std::uint32_t iterations_per_epoch = 1;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::dmil_plus_center;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

void validate_config(const TrainingConfig& config);

struct IterationRecord {
  std::uint64_t iteration = 0;
  double total = 0.0;
  double dmil = 0.0;    // selection term (DMIL, or k-max MIL for the baseline)
  double center = 0.0;  // unweighted center term; 0 when the mode has none
};

struct EpochSnapshot {
  std::uint32_t epoch = 0;
  double auc = 0.0;
  double far = 0.0;
};

struct TrainingHistory {
  std::vector<IterationRecord> iterations;
  std::vector<EpochSnapshot> validation;
  std::optional<std::uint32_t> best_epoch;
};

struct TrainingResult {
  ModelParameters params;
  TrainingHistory history;
};

/// Indices into `bags`: batch_normal label-0 videos followed by
/// batch_abnormal label-1 videos. Within a class, sampling is without
/// replacement, or with replacement when the class holds fewer videos than
/// requested.
std::vector<std::size_t> sample_batch(std::span<const FeatureBag> bags,
                                      const TrainingConfig& config, Rng& rng);

/// Seeded mini-batch training. Returns the parameters with the best
/// validation AUC when `validation` is non-empty, else the final ones.
/// Throws DivergenceError naming the video if a loss becomes non-finite.
TrainingResult train(std::span<const FeatureBag> train_bags, const TrainingConfig& config,
                     std::span<const FeatureBag> validation = {});

/// Mean eval-mode objective over `bags` under the config's loss mode.
IterationRecord dataset_objective(const ModelParameters& params, std::span<const FeatureBag> bags,
                                  const TrainingConfig& config);

/// `iteration,total,dmil,center`.
void write_history_csv(const TrainingHistory& history, const std::filesystem::path& path);

/// `epoch,auc,far`.
void write_validation_csv(const TrainingHistory& history, const std::filesystem::path& path);

}  // namespace arnet
