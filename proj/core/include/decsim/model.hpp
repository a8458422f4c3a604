// SPDX-License-Identifier: Apache-2.0
#pragma once

// Small differentiable classifiers with hand-written gradients. Parameters are
// one flat vector cut into named tensors so that per-tensor statistics can be
// taken across replicas.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decsim {

enum class ModelKind { Linear, MLP };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::Linear;
  int input_dim = 1;
  std::optional<int> hidden_dim;
  int output_dim = 2;
  std::uint64_t seed = 0;
};

/// Throws ConfigError on non-positive dims or an MLP without hidden_dim.
void validate(const ModelSpec& spec);

struct TensorSegment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::vector<std::size_t> shape;
};

/// Ordered tensor segments that tile [0, size()) without gaps or overlaps.
class TensorLayout {
 public:
  /// Throws std::logic_error when the segments do not tile exactly.
  explicit TensorLayout(std::vector<TensorSegment> segments);

  std::span<const TensorSegment> segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t tensor_count() const noexcept { return segments_.size(); }

 private:
  std::vector<TensorSegment> segments_;
  std::size_t size_ = 0;
};

std::shared_ptr<const TensorLayout> make_layout(const ModelSpec& spec);

/// Flat parameter (or gradient) vector plus a shared, immutable layout.
struct ParamVector {
  std::vector<double> values;
  std::shared_ptr<const TensorLayout> layout;

  ParamVector() = default;
  explicit ParamVector(std::shared_ptr<const TensorLayout> l)
      : values(l ? l->size() : 0, 0.0), layout(std::move(l)) {}

  std::size_t size() const noexcept { return values.size(); }
  std::span<const TensorSegment> segments() const { return layout->segments(); }
  std::span<const double> tensor(std::size_t index) const {
    const auto& s = layout->segments()[index];
    return std::span<const double>(values).subspan(s.offset, s.length);
  }
  std::span<double> tensor(std::size_t index) {
    const auto& s = layout->segments()[index];
    return std::span<double>(values).subspan(s.offset, s.length);
  }
};

/// Row-major [size x input_dim] inputs and one label per row.
struct Batch {
  std::size_t input_dim = 0;
  std::vector<double> inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases alike, as in
/// PyTorch's Linear default. A pure function of the spec, so replicas built
/// from one spec are bit-identical.
ParamVector init_params(const ModelSpec& spec);

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Mean softmax cross-entropy over the batch and its exact gradient.
/// Throws NumericalError on a non-finite loss.
LossAndGrad loss_and_grad(const ParamVector& params, const ModelSpec& spec, const Batch& batch);

/// Class logits for every row of a row-major input matrix.
std::vector<double> forward_logits(const ParamVector& params, const ModelSpec& spec,
                                   std::span<const double> inputs);

/// Fraction of rows whose arg-max logit equals the label (ties go to the lowest class).
double accuracy(const ParamVector& params, const ModelSpec& spec, std::span<const double> inputs,
                std::span<const int> labels);

struct TensorNorm {
  std::string name;
  double norm = 0.0;
};

/// Euclidean norm of each tensor, in layout order.
std::vector<TensorNorm> tensor_l2_norms(const ParamVector& params);

}  // namespace decsim
