#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evorl/rng.hpp"

namespace evorl {

using ParamVector = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Head { DeterministicTanh, Gaussian, Categorical, Linear };

struct NetFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// MLP: input -> [Linear -> (LayerNorm) -> ReLU]* -> Linear -> head.
// Layer norm applies to hidden layers only. The Gaussian head's log-std is a
// learned state-independent parameter segment, clamped to [min_logstd, max_logstd].
struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden;
  int output_dim = 1;
  bool layer_norm = false;
  Head head = Head::Linear;
  double tanh_scale = 1.0;
  double min_logstd = -20.0;
  double max_logstd = 2.0;
};

// Flat parameter layout: per layer, weights then biases (then layer-norm gain
// and offset on normalized hidden layers); a trailing "logstd" segment for the
// Gaussian head. Weight matrices are column-major (rows x cols), so flat index
// 0 of a weight segment is (row 0, col 0).
struct ParamSegment {
  int layer = 0;
  std::string name;  // "w", "b", "ln_gain", "ln_offset", "logstd"
  int offset = 0;
  int rows = 0;
  int cols = 1;
  int size() const { return rows * cols; }
};

struct ParamLayout {
  std::vector<ParamSegment> segments;
  int total = 0;
  const ParamSegment& find(int layer, std::string_view name) const;
};

ParamLayout param_layout(const MlpSpec& spec);
int param_count(const MlpSpec& spec);

inline Eigen::Map<const Mat> segment_mat(const ParamVector& p, const ParamSegment& s) {
  return {p.data() + s.offset, s.rows, s.cols};
}
inline Eigen::Map<Mat> segment_mat(ParamVector& p, const ParamSegment& s) {
  return {p.data() + s.offset, s.rows, s.cols};
}
inline Eigen::Map<const Vec> segment_vec(const ParamVector& p, const ParamSegment& s) {
  return {p.data() + s.offset, s.rows};
}
inline Eigen::Map<Vec> segment_vec(ParamVector& p, const ParamSegment& s) {
  return {p.data() + s.offset, s.rows};
}

// Glorot-uniform weights, zero biases, unit gains / zero offsets, zero logstd.
ParamVector init_params(const MlpSpec& spec, RngKey key);

// Caches one forward pass over a batch for the matching backward call.
struct GradTape {
  std::vector<Mat> inputs;      // per layer: its input rows (b x fan_in)
  std::vector<Mat> preact;      // per hidden layer: pre-ReLU rows
  std::vector<Mat> normalized;  // per hidden layer: (z - mean) * inv_std (layer_norm only)
  std::vector<Vec> inv_std;     // per hidden layer, per row (layer_norm only)
  Mat head_pre;
  Mat tanh_out;
  bool consumed = false;
};

// Returns the head output per row: DeterministicTanh -> scale*tanh(pre),
// Gaussian -> mean, Categorical -> logits, Linear -> values. Rows are computed
// independently, so a row's output is bitwise identical at any batch size.
Mat forward(const MlpSpec& spec, const ParamVector& params, const Mat& obs_batch,
            GradTape* tape = nullptr);

// Clamped per-dimension log-std (Gaussian head only).
Vec gaussian_logstd(const MlpSpec& spec, const ParamVector& params);

// out_grad is d(loss)/d(head output). Returns d(loss)/d(params); the Gaussian
// logstd segment is left zero (its gradient lives in the loss code, which adds
// it through the clamp mask). d_input, when given, receives d(loss)/d(obs).
ParamVector backward(const MlpSpec& spec, const ParamVector& params, GradTape& tape,
                     const Mat& out_grad, Mat* d_input = nullptr);

}  // namespace evorl
