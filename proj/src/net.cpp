#include "evorl/net.hpp"

#include <cmath>

namespace evorl {

namespace {
constexpr double kLnEps = 1e-5;

std::vector<int> layer_dims(const MlpSpec& spec) {
  std::vector<int> dims;
  dims.push_back(spec.input_dim);
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(spec.output_dim);
  return dims;
}
}  // namespace

const ParamSegment& ParamLayout::find(int layer, std::string_view name) const {
  for (const auto& s : segments)
    if (s.layer == layer && s.name == name) return s;
  throw std::out_of_range("param segment not found: layer " + std::to_string(layer) + " '" +
                          std::string(name) + "'");
}

ParamLayout param_layout(const MlpSpec& spec) {
  if (spec.hidden.empty()) throw std::invalid_argument("MlpSpec.hidden must be nonempty");
  ParamLayout layout;
  const auto dims = layer_dims(spec);
  const int nlayers = static_cast<int>(dims.size()) - 1;
  int off = 0;
  auto push = [&](int layer, const char* name, int rows, int cols) {
    layout.segments.push_back({layer, name, off, rows, cols});
    off += rows * cols;
  };
  for (int l = 0; l < nlayers; ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    push(l, "w", fan_out, fan_in);
    push(l, "b", fan_out, 1);
    if (spec.layer_norm && l < nlayers - 1) {
      push(l, "ln_gain", fan_out, 1);
      push(l, "ln_offset", fan_out, 1);
    }
  }
  if (spec.head == Head::Gaussian) push(nlayers, "logstd", spec.output_dim, 1);
  layout.total = off;
  return layout;
}

int param_count(const MlpSpec& spec) { return param_layout(spec).total; }

ParamVector init_params(const MlpSpec& spec, RngKey key) {
  const auto layout = param_layout(spec);
  ParamVector p = ParamVector::Zero(layout.total);
  RandomStream stream(key);
  for (const auto& s : layout.segments) {
    if (s.name == "w") {
      const double limit = std::sqrt(6.0 / (s.cols + s.rows));  // cols = fan_in, rows = fan_out
      auto w = segment_mat(p, s);
      for (int c = 0; c < s.cols; ++c)
        for (int r = 0; r < s.rows; ++r) w(r, c) = stream.uniform(-limit, limit);
    } else if (s.name == "ln_gain") {
      segment_vec(p, s).setOnes();
    }
    // biases, ln_offset, logstd stay zero
  }
  return p;
}

Vec gaussian_logstd(const MlpSpec& spec, const ParamVector& params) {
  const auto layout = param_layout(spec);
  const auto& s = layout.find(static_cast<int>(spec.hidden.size()) + 1, "logstd");
  Vec out = segment_vec(params, s);
  return out.cwiseMax(spec.min_logstd).cwiseMin(spec.max_logstd);
}

Mat forward(const MlpSpec& spec, const ParamVector& params, const Mat& obs_batch,
            GradTape* tape) {
  const auto layout = param_layout(spec);
  if (params.size() != layout.total)
    throw std::invalid_argument("forward: params length does not match spec layout");
  const auto dims = layer_dims(spec);
  const int nlayers = static_cast<int>(dims.size()) - 1;
  const auto b = obs_batch.rows();

  Mat x = obs_batch;
  for (int l = 0; l < nlayers; ++l) {
    const auto w = segment_mat(params, layout.find(l, "w"));
    const auto bias = segment_vec(params, layout.find(l, "b"));
    if (tape) tape->inputs.push_back(x);

    // Row-by-row GEMV keeps each row's accumulation order independent of the
    // batch size (bitwise batch-invariance).
    Mat z(b, dims[l + 1]);
    for (Eigen::Index r = 0; r < b; ++r)
      z.row(r).noalias() = (w * x.row(r).transpose() + bias).transpose();

    const bool hidden = l < nlayers - 1;
    if (hidden) {
      if (spec.layer_norm) {
        const auto gain = segment_vec(params, layout.find(l, "ln_gain"));
        const auto offset = segment_vec(params, layout.find(l, "ln_offset"));
        const int n = dims[l + 1];
        Mat normalized(b, n);
        Vec inv_std(b);
        for (Eigen::Index r = 0; r < b; ++r) {
          const double mean = z.row(r).mean();
          const double var = (z.row(r).array() - mean).square().mean();
          inv_std[r] = 1.0 / std::sqrt(var + kLnEps);
          normalized.row(r) = ((z.row(r).array() - mean) * inv_std[r]).matrix();
        }
        z = ((normalized.array().rowwise() * gain.transpose().array()).rowwise() +
             offset.transpose().array())
                .matrix();
        if (tape) {
          tape->normalized.push_back(std::move(normalized));
          tape->inv_std.push_back(std::move(inv_std));
        }
      }
      if (tape) tape->preact.push_back(z);
      x = z.cwiseMax(0.0);
    } else {
      x = std::move(z);
    }
    if (!x.allFinite())
      throw NetFault("forward: non-finite activations at layer " + std::to_string(l));
  }

  if (tape) tape->head_pre = x;
  if (spec.head == Head::DeterministicTanh) {
    Mat t = x.array().tanh().matrix();
    if (tape) tape->tanh_out = t;
    return spec.tanh_scale * t;
  }
  return x;
}

ParamVector backward(const MlpSpec& spec, const ParamVector& params, GradTape& tape,
                     const Mat& out_grad, Mat* d_input) {
  if (tape.consumed) throw std::logic_error("backward: tape already consumed");
  tape.consumed = true;
  const auto layout = param_layout(spec);
  const auto dims = layer_dims(spec);
  const int nlayers = static_cast<int>(dims.size()) - 1;
  if (out_grad.rows() != tape.head_pre.rows() || out_grad.cols() != tape.head_pre.cols())
    throw std::invalid_argument("backward: out_grad shape does not match tape");

  ParamVector grad = ParamVector::Zero(layout.total);

  Mat dy;  // running gradient, w.r.t. the current layer's output
  if (spec.head == Head::DeterministicTanh) {
    dy = (out_grad.array() * spec.tanh_scale * (1.0 - tape.tanh_out.array().square())).matrix();
  } else {
    dy = out_grad;
  }

  for (int l = nlayers - 1; l >= 0; --l) {
    const bool hidden = l < nlayers - 1;
    if (hidden) {
      // dy arrives w.r.t. this layer's ReLU output; mask, then undo layer norm.
      dy.array() *= (tape.preact[l].array() > 0.0).cast<double>();
      if (spec.layer_norm) {
        const auto gain = segment_vec(params, layout.find(l, "ln_gain"));
        const Mat& normalized = tape.normalized[l];
        const Vec& inv_std = tape.inv_std[l];
        segment_vec(grad, layout.find(l, "ln_gain")) =
            (dy.array() * normalized.array()).colwise().sum().transpose().matrix();
        segment_vec(grad, layout.find(l, "ln_offset")) = dy.colwise().sum().transpose();
        Mat dn = (dy.array().rowwise() * gain.transpose().array()).matrix();
        Mat dz(dy.rows(), dy.cols());
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
          const double mean_dn = dn.row(r).mean();
          const double mean_dn_n = (dn.row(r).array() * normalized.row(r).array()).mean();
          dz.row(r) = (inv_std[r] * (dn.row(r).array() - mean_dn -
                                     normalized.row(r).array() * mean_dn_n))
                          .matrix();
        }
        dy = std::move(dz);
      }
    }
    const auto& x = tape.inputs[l];
    const auto w = segment_mat(params, layout.find(l, "w"));
    segment_mat(grad, layout.find(l, "w")).noalias() = dy.transpose() * x;
    segment_vec(grad, layout.find(l, "b")) = dy.colwise().sum().transpose();
    if (l > 0) {
      dy = (dy * w).eval();
    } else if (d_input) {
      *d_input = dy * w;
    }
  }
  return grad;
}

}  // namespace evorl
