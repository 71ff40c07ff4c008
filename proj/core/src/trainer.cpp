#include "arnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "arnet/errors.hpp"
#include "arnet/eval.hpp"
#include "arnet/format.hpp"
#include "arnet/optim.hpp"
#include "binary_io.hpp"

namespace arnet {
namespace {

void sample_class(const std::vector<std::size_t>& pool, std::uint32_t count, Rng& rng,
                  std::vector<std::size_t>& out) {
  if (pool.size() >= count) {
    // Partial Fisher-Yates.
    std::vector<std::size_t> work = pool;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.index(work.size() - i);
      std::swap(work[i], work[j]);
      out.push_back(work[i]);
    }
  } else {
    for (std::uint32_t i = 0; i < count; ++i) out.push_back(pool[rng.index(pool.size())]);
  }
}

template <typename Tag>
void accumulate(ParameterArrays<Tag>& into, const ParameterArrays<Tag>& g) {
  into.w_fc += g.w_fc;
  into.b_fc += g.b_fc;
  into.w_ar += g.w_ar;
  into.b_ar += g.b_ar;
}

template <typename Tag>
void scale(ParameterArrays<Tag>& p, double factor) {
  p.w_fc *= factor;
  p.b_fc *= factor;
  p.w_ar *= factor;
  p.b_ar *= factor;
}

Eigen::Index common_dim(std::span<const FeatureBag> bags) {
  if (bags.empty()) throw std::invalid_argument("empty training set");
  const Eigen::Index f = bags.front().feature_dim();
  for (const auto& b : bags) {
    if (b.feature_dim() != f) {
      throw ShapeError("video '" + b.video_id + "' has feature dimension " +
                       std::to_string(b.feature_dim()) + ", expected " + std::to_string(f));
    }
  }
  return f;
}

}  // namespace

void validate_config(const TrainingConfig& c) {
  if (!(c.alpha > 0.0) || !std::isfinite(c.alpha)) throw std::invalid_argument("alpha must be > 0");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(c.dropout_p >= 0.0 && c.dropout_p < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (c.batch_normal < 1 || c.batch_abnormal < 1) throw std::invalid_argument("batch sizes must be >= 1");
  if (c.iterations_per_epoch < 1) throw std::invalid_argument("iterations_per_epoch must be >= 1");
}

std::vector<std::size_t> sample_batch(std::span<const FeatureBag> bags,
                                      const TrainingConfig& config, Rng& rng) {
  std::vector<std::size_t> normal;
  std::vector<std::size_t> anomalous;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    (bags[i].label == VideoLabel::normal ? normal : anomalous).push_back(i);
  }
  if (normal.empty()) throw std::invalid_argument("cannot sample a batch: no normal (label 0) videos");
  if (anomalous.empty()) throw std::invalid_argument("cannot sample a batch: no anomalous (label 1) videos");

  std::vector<std::size_t> batch;
  batch.reserve(config.batch_normal + config.batch_abnormal);
  sample_class(normal, config.batch_normal, rng, batch);
  sample_class(anomalous, config.batch_abnormal, rng, batch);
  return batch;
}

TrainingResult train(std::span<const FeatureBag> train_bags, const TrainingConfig& config,
                     std::span<const FeatureBag> validation) {
  validate_config(config);
  require_both_classes(train_bags);
  const Eigen::Index f = common_dim(train_bags);

  std::vector<Eigen::MatrixXd> inputs;
  inputs.reserve(train_bags.size());
  for (const auto& b : train_bags) inputs.push_back(b.features.cast<double>());

  TrainingResult result{xavier_init(f, derive_seed(config.seed, "init")), {}};
  AdamState adam(f, AdamConfig{config.learning_rate, config.adam_beta1, config.adam_beta2,
                               config.adam_epsilon});
  Rng sampling(derive_seed(config.seed, "sampling"));
  Rng dropout(derive_seed(config.seed, "dropout"));

  ModelParameters& params = result.params;
  std::optional<ModelParameters> best;
  double best_auc = -1.0;
  std::uint64_t iteration = 0;

  for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::uint32_t it = 0; it < config.iterations_per_epoch; ++it, ++iteration) {
      const auto batch = sample_batch(train_bags, config, sampling);
      auto grads = ParameterGradients::zeros(f);
      IterationRecord record{iteration, 0.0, 0.0, 0.0};

      // Masks are drawn in batch order; gradients are accumulated in
      // manifest order (ties by batch position) so the floating-point sum
      // does not depend on how the batch happened to be shuffled.
      std::vector<std::uint64_t> mask_seeds(batch.size());
      for (auto& s : mask_seeds) s = dropout.next_u64();
      std::vector<std::size_t> order(batch.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return batch[a] < batch[b]; });

      for (std::size_t pos : order) {
        const std::size_t idx = batch[pos];
        const FeatureBag& bag = train_bags[idx];
        const ForwardCache cache =
            forward(params, inputs[idx], Mode::train, config.dropout_p, mask_seeds[pos]);
        const VideoObjective obj =
            video_objective(cache.scores, bag.label, config.loss_mode, config.alpha, config.lambda);
        if (!std::isfinite(obj.total) || !obj.dl_dscores.allFinite()) {
          throw DivergenceError("non-finite loss at iteration " + std::to_string(iteration) +
                                " on video '" + bag.video_id + "'");
        }
        accumulate(grads, backward(cache, params, obj.dl_dscores));
        record.total += obj.total;
        record.dmil += obj.selection;
        record.center += obj.center;
      }

      const double inv = 1.0 / static_cast<double>(batch.size());
      scale(grads, inv);
      record.total *= inv;
      record.dmil *= inv;
      record.center *= inv;
      result.history.iterations.push_back(record);
      try {
        adam_step(params, grads, adam);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at iteration " + std::to_string(iteration));
      }
    }

    if (!validation.empty()) {
      const EvaluationReport report = evaluate(params, validation);
      result.history.validation.push_back({epoch, report.auc, report.far});
      if (report.auc > best_auc) {
        best_auc = report.auc;
        best = params;
        result.history.best_epoch = epoch;
      }
    }
  }

  if (best) result.params = *best;
  return result;
}

IterationRecord dataset_objective(const ModelParameters& params, std::span<const FeatureBag> bags,
                                  const TrainingConfig& config) {
  IterationRecord mean;
  if (bags.empty()) return mean;
  for (const auto& b : bags) {
    const auto scores = predict(params, b.features.cast<double>());
    const auto obj = video_objective(scores, b.label, config.loss_mode, config.alpha, config.lambda);
    mean.total += obj.total;
    mean.dmil += obj.selection;
    mean.center += obj.center;
  }
  const double inv = 1.0 / static_cast<double>(bags.size());
  mean.total *= inv;
  mean.dmil *= inv;
  mean.center *= inv;
  return mean;
}

void write_history_csv(const TrainingHistory& history, const std::filesystem::path& path) {
  std::string text = "iteration,total,dmil,center\n";
  for (const auto& r : history.iterations) {
    text += std::to_string(r.iteration) + ',' + format_real(r.total) + ',' + format_real(r.dmil) +
            ',' + format_real(r.center) + '\n';
  }
  detail::write_file_bytes(path, text);
}

void write_validation_csv(const TrainingHistory& history, const std::filesystem::path& path) {
  std::string text = "epoch,auc,far\n";
  for (const auto& s : history.validation) {
    text += std::to_string(s.epoch) + ',' + format_real(s.auc) + ',' + format_real(s.far) + '\n';
  }
  detail::write_file_bytes(path, text);
}

}  // namespace arnet
