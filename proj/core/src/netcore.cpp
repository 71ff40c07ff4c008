#include "arnet/netcore.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "arnet/errors.hpp"
#include "arnet/rng.hpp"
#include "binary_io.hpp"

namespace arnet {
namespace {

constexpr std::string_view kCheckpointMagic = "ARNETW01";

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_params(const ModelParameters& params) {
  if (!params.shapes_consistent()) throw ShapeError("model parameters have inconsistent shapes");
}

}  // namespace

ModelParameters xavier_init(Eigen::Index feature_dim, std::uint64_t seed) {
  if (feature_dim < 1) throw std::invalid_argument("xavier_init: feature dimension must be >= 1");
  Rng rng(seed);
  auto params = ModelParameters::zeros(feature_dim);
  const double f = static_cast<double>(feature_dim);
  const double fc_bound = std::sqrt(6.0 / (f + f));
  const double ar_bound = std::sqrt(6.0 / (f + 1.0));
  for (Eigen::Index i = 0; i < params.w_fc.size(); ++i) {
    params.w_fc.data()[i] = rng.uniform(-fc_bound, fc_bound);
  }
  for (Eigen::Index i = 0; i < params.w_ar.size(); ++i) {
    params.w_ar[i] = rng.uniform(-ar_bound, ar_bound);
  }
  return params;
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p_drop,
                             std::uint64_t seed) {
  if (!(p_drop >= 0.0 && p_drop < 1.0)) {
    throw std::invalid_argument("dropout probability must lie in [0, 1)");
  }
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(rows, cols);
  if (p_drop == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - p_drop);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.bernoulli(p_drop) ? 0.0 : keep_scale;
  }
  return mask;
}

ForwardCache forward(const ModelParameters& params, const Eigen::MatrixXd& x, Mode mode,
                     double p_drop, std::uint64_t mask_seed) {
  check_params(params);
  if (x.rows() != params.feature_dim() || x.cols() < 1) {
    throw ShapeError("forward: input is " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + ", expected " +
                     std::to_string(params.feature_dim()) + " rows and at least one clip");
  }
  ForwardCache cache;
  cache.mode = mode;
  cache.input = x;
  cache.z1 = (params.w_fc * x).colwise() + params.b_fc;
  cache.mask = mode == Mode::train ? dropout_mask(x.rows(), x.cols(), p_drop, mask_seed)
                                   : Eigen::MatrixXd::Ones(x.rows(), x.cols());
  cache.hidden = cache.z1.cwiseMax(0.0).cwiseProduct(cache.mask);
  cache.z2 = (params.w_ar * cache.hidden).array() + params.b_ar;
  cache.scores = cache.z2.unaryExpr(&sigmoid);
  return cache;
}

Eigen::RowVectorXd predict(const ModelParameters& params, const Eigen::MatrixXd& x) {
  return forward(params, x, Mode::eval).scores;
}

ParameterGradients backward(const ForwardCache& cache, const ModelParameters& params,
                            const Eigen::RowVectorXd& dl_dscores) {
  check_params(params);
  const Eigen::Index f = params.feature_dim();
  const Eigen::Index t = cache.scores.size();
  if (cache.input.rows() != f || cache.hidden.rows() != f || cache.z1.rows() != f ||
      cache.input.cols() != t) {
    throw ShapeError("backward: cache does not match parameter dimension");
  }
  if (dl_dscores.size() != t) {
    throw ShapeError("backward: dL/ds has length " + std::to_string(dl_dscores.size()) +
                     ", expected " + std::to_string(t));
  }

  const auto& s = cache.scores.array();
  const Eigen::RowVectorXd dz2 = (dl_dscores.array() * s * (1.0 - s)).matrix();

  ParameterGradients grads;
  grads.w_ar = dz2 * cache.hidden.transpose();
  grads.b_ar = dz2.sum();

  // Subgradient of relu at exactly zero is taken as 0.
  const Eigen::MatrixXd relu_gate = (cache.z1.array() > 0.0).cast<double>().matrix();
  const Eigen::MatrixXd dz1 =
      ((params.w_ar.transpose() * dz2).array() * cache.mask.array() * relu_gate.array()).matrix();
  grads.w_fc = dz1 * cache.input.transpose();
  grads.b_fc = dz1.rowwise().sum();
  return grads;
}

void save_checkpoint(const ModelParameters& params, const std::filesystem::path& path) {
  check_params(params);
  if (!params.all_finite()) throw std::invalid_argument("refusing to save non-finite parameters");
  const Eigen::Index f = params.feature_dim();
  std::string bytes;
  bytes.reserve(kCheckpointMagic.size() + 4 + 8 * static_cast<std::size_t>(f * f + 2 * f + 1));
  bytes.append(kCheckpointMagic);
  detail::put_u32(bytes, static_cast<std::uint32_t>(f));
  for (Eigen::Index r = 0; r < f; ++r) {
    for (Eigen::Index c = 0; c < f; ++c) detail::put_f64(bytes, params.w_fc(r, c));
  }
  for (Eigen::Index i = 0; i < f; ++i) detail::put_f64(bytes, params.b_fc[i]);
  for (Eigen::Index i = 0; i < f; ++i) detail::put_f64(bytes, params.w_ar[i]);
  detail::put_f64(bytes, params.b_ar);
  detail::write_file_bytes(path, bytes);
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  detail::ByteReader reader(bytes);
  if (bytes.size() < kCheckpointMagic.size() + 4 ||
      reader.take(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError(path.string() + ": bad checkpoint magic");
  }
  const std::uint32_t f = reader.u32();
  if (f == 0) throw FormatError(path.string() + ": zero feature dimension");
  const std::uint64_t expected = kCheckpointMagic.size() + 4 + 8ULL * (1ULL * f * f + 2ULL * f + 1);
  if (bytes.size() != expected) {
    throw FormatError(path.string() + ": checkpoint size " + std::to_string(bytes.size()) +
                      " does not match header (expected " + std::to_string(expected) + ")");
  }
  auto params = ModelParameters::zeros(f);
  for (Eigen::Index r = 0; r < f; ++r) {
    for (Eigen::Index c = 0; c < f; ++c) params.w_fc(r, c) = reader.f64();
  }
  for (Eigen::Index i = 0; i < f; ++i) params.b_fc[i] = reader.f64();
  for (Eigen::Index i = 0; i < f; ++i) params.w_ar[i] = reader.f64();
  params.b_ar = reader.f64();
  return params;
}

}  // namespace arnet
