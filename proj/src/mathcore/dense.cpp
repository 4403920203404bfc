#include "colinf/mathcore/dense.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "colinf/error.hpp"

namespace colinf {

std::size_t DenseParams::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }

std::size_t DenseParams::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

std::size_t DenseParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void DenseParams::validate() const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.bias.size() != layer.weight.rows())
      throw ShapeError("layer " + std::to_string(l) + ": bias length " +
                       std::to_string(layer.bias.size()) + " != weight rows " +
                       std::to_string(layer.weight.rows()));
    if (l > 0 && layers[l - 1].out_dim() != layer.in_dim())
      throw ShapeError("layer " + std::to_string(l) + ": input " + std::to_string(layer.in_dim()) +
                       " does not chain with previous output " +
                       std::to_string(layers[l - 1].out_dim()));
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw DomainError("layer " + std::to_string(l) + " has a non-finite parameter");
  }
}

std::vector<std::span<double>> DenseParams::views() {
  std::vector<std::span<double>> out;
  out.reserve(layers.size() * 2);
  for (auto& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

std::vector<std::span<const double>> DenseParams::views() const {
  std::vector<std::span<const double>> out;
  out.reserve(layers.size() * 2);
  for (const auto& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

DenseParams make_mlp(std::span<const std::size_t> widths, Rng& rng) {
  if (widths.size() < 2) throw ShapeError("an MLP needs at least input and output widths");
  DenseParams p;
  const std::size_t n_layers = widths.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    if (in == 0 || out == 0) throw ShapeError("MLP widths must be positive");
    DenseLayer layer;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    layer.weight.resize(out, in);
    for (Eigen::Index c = 0; c < in; ++c)
      for (Eigen::Index r = 0; r < out; ++r) layer.weight(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    layer.bias = Vector::Zero(out);
    layer.activation = (l + 1 == n_layers) ? Activation::identity : Activation::relu;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

DenseParams zeros_like(const DenseParams& params) {
  DenseParams z;
  z.layers.reserve(params.layers.size());
  for (const auto& l : params.layers)
    z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size()),
                        l.activation});
  return z;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool bit_equal(const DenseParams& a, const DenseParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  auto va = a.views();
  auto vb = b.views();
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i].size() != vb[i].size()) return false;
    if (!std::equal(va[i].begin(), va[i].end(), vb[i].begin(),
                    [](double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; }))
      return false;
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (a.layers[l].activation != b.layers[l].activation) return false;
  return true;
}

Vector mlp_forward(const DenseParams& params, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != params.in_dim())
    throw ShapeError("mlp_forward: input has " + std::to_string(x.size()) + " entries, expected " +
                     std::to_string(params.in_dim()));
  Vector h = x;
  for (const auto& l : params.layers) {
    Vector next = l.weight * h + l.bias;
    if (l.activation == Activation::relu) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

Matrix forward_layers(const DenseParams& params, std::size_t first, std::size_t last,
                      const Matrix& x) {
  if (first > last || last > params.layers.size()) throw ShapeError("forward_layers: bad layer range");
  if (first == last) return x;
  if (static_cast<std::size_t>(x.cols()) != params.layers[first].in_dim())
    throw ShapeError("forward_layers: input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(params.layers[first].in_dim()));
  Matrix h = x;
  for (std::size_t i = first; i < last; ++i) {
    const auto& l = params.layers[i];
    Matrix next = h * l.weight.transpose();
    next.rowwise() += l.bias.transpose();
    if (l.activation == Activation::relu) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

Vector softmax_row(const Vector& scores) {
  if (scores.size() == 0) throw DomainError("softmax_row: empty input");
  const double m = scores.maxCoeff();
  Vector e = (scores.array() - m).exp();
  return e / e.sum();
}

double cross_entropy(const Vector& logits, std::size_t label) {
  if (label >= static_cast<std::size_t>(logits.size()))
    throw DomainError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                      std::to_string(logits.size()) + " classes");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(static_cast<Eigen::Index>(label));
}

Vector cross_entropy_grad(const Vector& logits, std::size_t label) {
  if (label >= static_cast<std::size_t>(logits.size()))
    throw DomainError("cross_entropy: label out of range");
  Vector g = softmax_row(logits);
  g(static_cast<Eigen::Index>(label)) -= 1.0;
  return g;
}

std::size_t argmax(const Vector& v) {
  Eigen::Index idx = 0;
  v.maxCoeff(&idx);
  return static_cast<std::size_t>(idx);
}

}  // namespace colinf
