#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>

namespace arnet {

/// The four learnable arrays of the network, shared by parameter values and
/// their gradients. `Tag` keeps the two roles from being mixed up.
template <typename Tag>
struct ParameterArrays {
  Eigen::MatrixXd w_fc;    // F x F
  Eigen::VectorXd b_fc;    // F
  Eigen::RowVectorXd w_ar; // 1 x F
  double b_ar = 0.0;

  static ParameterArrays zeros(Eigen::Index feature_dim) {
    ParameterArrays p;
    p.w_fc = Eigen::MatrixXd::Zero(feature_dim, feature_dim);
    p.b_fc = Eigen::VectorXd::Zero(feature_dim);
    p.w_ar = Eigen::RowVectorXd::Zero(feature_dim);
    return p;
  }

  Eigen::Index feature_dim() const { return w_fc.rows(); }

  bool shapes_consistent() const {
    const auto f = w_fc.rows();
    return f >= 1 && w_fc.cols() == f && b_fc.size() == f && w_ar.size() == f;
  }

  bool all_finite() const {
    return w_fc.allFinite() && b_fc.allFinite() && w_ar.allFinite() && std::isfinite(b_ar);
  }

  friend bool operator==(const ParameterArrays& a, const ParameterArrays& b) {
    return a.w_fc.rows() == b.w_fc.rows() && a.w_fc == b.w_fc && a.b_fc == b.b_fc &&
           a.w_ar == b.w_ar && a.b_ar == b.b_ar;
  }
};

struct ParameterValueTag;
struct ParameterGradientTag;
using ModelParameters = ParameterArrays<ParameterValueTag>;
using ParameterGradients = ParameterArrays<ParameterGradientTag>;

/// W_FC ~ U(+-sqrt(6/(2F))), W_AR ~ U(+-sqrt(6/(F+1))), biases zero.
ModelParameters xavier_init(Eigen::Index feature_dim, std::uint64_t seed);

/// Inverted dropout: each entry is 0 with probability p_drop, otherwise
/// 1/(1 - p_drop). Requires 0 <= p_drop < 1.
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p_drop,
                             std::uint64_t seed);

enum class Mode { train, eval };

/// Intermediate values of one forward pass, kept for backward.
struct ForwardCache {
  Eigen::MatrixXd input;   // X, F x t
  Eigen::MatrixXd z1;      // W_FC X + b_FC
  Eigen::MatrixXd mask;    // dropout keep-scale; all ones in eval mode
  Eigen::MatrixXd hidden;  // mask .* relu(z1)
  Eigen::RowVectorXd z2;   // W_AR hidden + b_AR
  Eigen::RowVectorXd scores;
  Mode mode = Mode::eval;
};

/// scores = sigmoid(W_AR * D(relu(W_FC X + b_FC)) + b_AR), one per clip.
/// In train mode the dropout mask is drawn from `mask_seed` with
/// probability `p_drop`; eval mode ignores both.
ForwardCache forward(const ModelParameters& params, const Eigen::MatrixXd& x, Mode mode,
                     double p_drop = 0.0, std::uint64_t mask_seed = 0);

/// Eval-mode scores only.
Eigen::RowVectorXd predict(const ModelParameters& params, const Eigen::MatrixXd& x);

/// Gradients of a scalar loss L with respect to every parameter, given
/// dL/ds for the cached forward pass.
ParameterGradients backward(const ForwardCache& cache, const ModelParameters& params,
                            const Eigen::RowVectorXd& dl_dscores);

// Checkpoint: "ARNETW01", F as u32 LE, then W_FC (row-major), b_FC, W_AR,
// b_AR as float64 LE.
void save_checkpoint(const ModelParameters& params, const std::filesystem::path& path);
ModelParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace arnet
