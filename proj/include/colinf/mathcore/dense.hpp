#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "colinf/rng.hpp"

namespace colinf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { identity, relu };

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

/// Fully connected stack. Hidden layers use ReLU, the output layer is affine.
struct DenseParams {
  std::vector<DenseLayer> layers;

  bool empty() const { return layers.empty(); }
  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t parameter_count() const;

  /// Throws ShapeError when dimensions do not chain, DomainError on a
  /// non-finite parameter.
  void validate() const;

  /// Flat views of every weight and bias, in a fixed order. Used by the
  /// optimizer and by checkpointing.
  std::vector<std::span<double>> views();
  std::vector<std::span<const double>> views() const;
};

/// `widths` lists the input dimension followed by every layer's output
/// dimension. Weights are Glorot-uniform in +-sqrt(6/(fan_in+fan_out)), biases 0.
DenseParams make_mlp(std::span<const std::size_t> widths, Rng& rng);

/// Same shapes, all zeros (gradient accumulators).
DenseParams zeros_like(const DenseParams& params);

bool bit_equal(const DenseParams& a, const DenseParams& b);
bool bit_equal(const Matrix& a, const Matrix& b);

Vector mlp_forward(const DenseParams& params, const Vector& x);

/// Rows of `x` are samples. Runs layers [first, last).
Matrix forward_layers(const DenseParams& params, std::size_t first, std::size_t last,
                      const Matrix& x);

inline Matrix mlp_forward_rows(const DenseParams& params, const Matrix& x) {
  return forward_layers(params, 0, params.layers.size(), x);
}

/// Max-subtracted softmax. Throws DomainError on an empty input.
Vector softmax_row(const Vector& scores);

/// -log softmax(logits)[label]. Throws DomainError when the label is out of range.
double cross_entropy(const Vector& logits, std::size_t label);

/// d cross_entropy / d logits = softmax(logits) - onehot(label).
Vector cross_entropy_grad(const Vector& logits, std::size_t label);

std::size_t argmax(const Vector& v);

}  // namespace colinf
