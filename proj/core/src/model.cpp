// SPDX-License-Identifier: Apache-2.0
#include "decsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "decsim/error.hpp"
#include "decsim/rng.hpp"

namespace decsim {
namespace {

struct Dims {
  std::size_t in;
  std::size_t hidden;
  std::size_t out;
};

Dims dims_of(const ModelSpec& spec) {
  return {static_cast<std::size_t>(spec.input_dim), static_cast<std::size_t>(spec.hidden_dim.value_or(0)),
          static_cast<std::size_t>(spec.output_dim)};
}

// out[b][o] = bias[o] + sum_i x[b][i] * w[i][o]
void affine(std::span<const double> x, std::size_t rows, std::size_t in, std::span<const double> w,
            std::span<const double> bias, std::size_t out, std::span<double> y) {
  for (std::size_t b = 0; b < rows; ++b) {
    double* yr = y.data() + b * out;
    std::copy(bias.begin(), bias.end(), yr);
    const double* xr = x.data() + b * in;
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      const double* wr = w.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
    }
  }
}

// Replaces logits by softmax probabilities in place; returns the summed
// cross-entropy of the labelled classes.
double softmax_xent(std::span<double> logits, std::size_t rows, std::size_t out, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t b = 0; b < rows; ++b) {
    double* z = logits.data() + b * out;
    const double zmax = *std::max_element(z, z + out);
    double sum = 0.0;
    for (std::size_t o = 0; o < out; ++o) sum += std::exp(z[o] - zmax);
    const double lse = zmax + std::log(sum);
    total += lse - z[static_cast<std::size_t>(labels[b])];
    for (std::size_t o = 0; o < out; ++o) z[o] = std::exp(z[o] - lse);
  }
  return total;
}

// gw[i][o] += sum_b x[b][i] * d[b][o]; gb[o] += sum_b d[b][o]
void affine_backward(std::span<const double> x, std::size_t rows, std::size_t in, std::span<const double> d,
                     std::size_t out, std::span<double> gw, std::span<double> gb) {
  for (std::size_t b = 0; b < rows; ++b) {
    const double* xr = x.data() + b * in;
    const double* dr = d.data() + b * out;
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      double* gr = gw.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) gr[o] += xi * dr[o];
    }
    for (std::size_t o = 0; o < out; ++o) gb[o] += dr[o];
  }
}

void check_batch(const ModelSpec& spec, const Batch& batch) {
  if (batch.size() == 0) throw ConfigError("batch must contain at least one row");
  if (batch.input_dim != static_cast<std::size_t>(spec.input_dim) ||
      batch.inputs.size() != batch.size() * batch.input_dim) {
    throw ConfigError(fmt::format("batch shape [{} x {}] does not match model input_dim {}", batch.size(),
                                  batch.input_dim, spec.input_dim));
  }
  for (int label : batch.labels) {
    if (label < 0 || label >= spec.output_dim) {
      throw ConfigError(fmt::format("label {} outside [0, {})", label, spec.output_dim));
    }
  }
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Linear ? "linear" : "mlp"; }

ModelKind parse_model_kind(std::string_view name) {
  if (name == "linear") return ModelKind::Linear;
  if (name == "mlp") return ModelKind::MLP;
  throw ConfigError(fmt::format("unknown model kind '{}' (expected linear or mlp)", name));
}

void validate(const ModelSpec& spec) {
  if (spec.input_dim < 1) throw ConfigError(fmt::format("model input_dim must be >= 1 (got {})", spec.input_dim));
  if (spec.output_dim < 1) throw ConfigError(fmt::format("model output_dim must be >= 1 (got {})", spec.output_dim));
  if (spec.kind == ModelKind::MLP) {
    if (!spec.hidden_dim) throw ConfigError("mlp model requires hidden_dim");
    if (*spec.hidden_dim < 1) throw ConfigError(fmt::format("model hidden_dim must be >= 1 (got {})", *spec.hidden_dim));
  }
}

TensorLayout::TensorLayout(std::vector<TensorSegment> segments) : segments_(std::move(segments)) {
  std::size_t cursor = 0;
  for (const auto& s : segments_) {
    std::size_t volume = 1;
    for (auto d : s.shape) volume *= d;
    if (s.offset != cursor || s.length != volume || s.length == 0) {
      throw std::logic_error(fmt::format("tensor '{}' does not tile the parameter vector at offset {}", s.name, cursor));
    }
    cursor += s.length;
  }
  size_ = cursor;
}

std::shared_ptr<const TensorLayout> make_layout(const ModelSpec& spec) {
  validate(spec);
  const auto d = dims_of(spec);
  std::vector<TensorSegment> segs;
  std::size_t off = 0;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    std::size_t len = 1;
    for (auto s : shape) len *= s;
    segs.push_back({std::move(name), off, len, std::move(shape)});
    off += len;
  };
  if (spec.kind == ModelKind::Linear) {
    add("weight", {d.in, d.out});
    add("bias", {d.out});
  } else {
    add("fc1.weight", {d.in, d.hidden});
    add("fc1.bias", {d.hidden});
    add("fc2.weight", {d.hidden, d.out});
    add("fc2.bias", {d.out});
  }
  return std::make_shared<const TensorLayout>(std::move(segs));
}

ParamVector init_params(const ModelSpec& spec) {
  ParamVector p(make_layout(spec));
  Rng rng(derive_seed({spec.seed, 0x1a17ULL}));
  // each bias follows its weight and shares that layer's fan-in
  std::size_t fan_in = 1;
  for (std::size_t t = 0; t < p.layout->tensor_count(); ++t) {
    const auto& seg = p.layout->segments()[t];
    if (seg.shape.size() == 2) fan_in = seg.shape[0];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : p.tensor(t)) v = rng.uniform(-bound, bound);
  }
  return p;
}

LossAndGrad loss_and_grad(const ParamVector& params, const ModelSpec& spec, const Batch& batch) {
  check_batch(spec, batch);
  const auto d = dims_of(spec);
  const std::size_t rows = batch.size();
  const double inv_rows = 1.0 / static_cast<double>(rows);

  LossAndGrad out{0.0, ParamVector(params.layout)};

  if (spec.kind == ModelKind::Linear) {
    std::vector<double> probs(rows * d.out);
    affine(batch.inputs, rows, d.in, params.tensor(0), params.tensor(1), d.out, probs);
    out.loss = softmax_xent(probs, rows, d.out, batch.labels) * inv_rows;
    for (std::size_t b = 0; b < rows; ++b) {
      probs[b * d.out + static_cast<std::size_t>(batch.labels[b])] -= 1.0;
    }
    for (double& v : probs) v *= inv_rows;
    affine_backward(batch.inputs, rows, d.in, probs, d.out, out.grad.tensor(0), out.grad.tensor(1));
  } else {
    std::vector<double> hidden(rows * d.hidden);
    affine(batch.inputs, rows, d.in, params.tensor(0), params.tensor(1), d.hidden, hidden);
    for (double& v : hidden) v = std::tanh(v);
    std::vector<double> probs(rows * d.out);
    affine(hidden, rows, d.hidden, params.tensor(2), params.tensor(3), d.out, probs);
    out.loss = softmax_xent(probs, rows, d.out, batch.labels) * inv_rows;
    for (std::size_t b = 0; b < rows; ++b) {
      probs[b * d.out + static_cast<std::size_t>(batch.labels[b])] -= 1.0;
    }
    for (double& v : probs) v *= inv_rows;
    affine_backward(hidden, rows, d.hidden, probs, d.out, out.grad.tensor(2), out.grad.tensor(3));

    // back through fc2 and tanh
    const auto w2 = params.tensor(2);
    std::vector<double> dpre(rows * d.hidden, 0.0);
    for (std::size_t b = 0; b < rows; ++b) {
      const double* dr = probs.data() + b * d.out;
      for (std::size_t h = 0; h < d.hidden; ++h) {
        const double* wr = w2.data() + h * d.out;
        double acc = 0.0;
        for (std::size_t o = 0; o < d.out; ++o) acc += dr[o] * wr[o];
        const double a = hidden[b * d.hidden + h];
        dpre[b * d.hidden + h] = acc * (1.0 - a * a);
      }
    }
    affine_backward(batch.inputs, rows, d.in, dpre, d.hidden, out.grad.tensor(0), out.grad.tensor(1));
  }

  if (!std::isfinite(out.loss)) throw NumericalError("non-finite cross-entropy loss");
  return out;
}

std::vector<double> forward_logits(const ParamVector& params, const ModelSpec& spec, std::span<const double> inputs) {
  const auto d = dims_of(spec);
  const std::size_t rows = inputs.size() / d.in;
  std::vector<double> logits(rows * d.out);
  if (spec.kind == ModelKind::Linear) {
    affine(inputs, rows, d.in, params.tensor(0), params.tensor(1), d.out, logits);
  } else {
    std::vector<double> hidden(rows * d.hidden);
    affine(inputs, rows, d.in, params.tensor(0), params.tensor(1), d.hidden, hidden);
    for (double& v : hidden) v = std::tanh(v);
    affine(hidden, rows, d.hidden, params.tensor(2), params.tensor(3), d.out, logits);
  }
  return logits;
}

double accuracy(const ParamVector& params, const ModelSpec& spec, std::span<const double> inputs,
                std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  const auto logits = forward_logits(params, spec, inputs);
  const auto out = static_cast<std::size_t>(spec.output_dim);
  std::size_t hits = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const auto first = logits.begin() + static_cast<std::ptrdiff_t>(b * out);
    const auto best = std::max_element(first, first + static_cast<std::ptrdiff_t>(out)) - first;
    if (best == labels[b]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<TensorNorm> tensor_l2_norms(const ParamVector& params) {
  std::vector<TensorNorm> out;
  out.reserve(params.layout->tensor_count());
  for (std::size_t t = 0; t < params.layout->tensor_count(); ++t) {
    double ss = 0.0;
    for (double v : params.tensor(t)) ss += v * v;
    out.push_back({params.layout->segments()[t].name, std::sqrt(ss)});
  }
  return out;
}

}  // namespace decsim
