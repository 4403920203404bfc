#include "colinf/mathcore/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "colinf/error.hpp"

namespace colinf {

bool LinkMask::link_clean(std::size_t g, std::size_t receiver, std::size_t sender) const {
  if (erased.empty() || receiver == sender) return true;
  const auto* f = erased.data() + offset(g, receiver, sender);
  return std::none_of(f, f + blocks(), [](std::uint8_t e) { return e != 0; });
}

LinkMask LinkMask::lossless(std::size_t groups, std::size_t nodes, std::size_t dim,
                            std::size_t block, double fill) {
  LinkMask m;
  m.groups = groups;
  m.nodes = nodes;
  m.dim = dim;
  m.block = block;
  m.fill = fill;
  return m;
}

Var Tape::push(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw StateError("variable is not recorded on this tape");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw StateError("variable is not recorded on this tape");
  return nodes_[v.id];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }
const Matrix& Tape::grad(Var v) const { return node(v).grad; }

Var Tape::constant(Matrix value) { return push(std::move(value), false); }

Var Tape::parameter(Matrix value, std::span<double> grad_sink) {
  if (grad_sink.size() != static_cast<std::size_t>(value.size()))
    throw ShapeError("parameter: gradient sink size does not match value");
  Var v = push(std::move(value), true);
  nodes_[v.id].sink = grad_sink;
  return v;
}

Var Tape::affine(Var x, Var w) {
  const Matrix& xv = node(x).value;
  const Matrix& wv = node(w).value;
  if (xv.cols() != wv.cols())
    throw ShapeError("affine: input has " + std::to_string(xv.cols()) + " columns, weight expects " +
                     std::to_string(wv.cols()));
  Var y = push(xv * wv.transpose(), needs(x) || needs(w));
  nodes_[y.id].backprop = [x, w](Tape& t, std::size_t self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.needs(x)) t.nodes_[x.id].grad.noalias() += g * t.nodes_[w.id].value;
    if (t.needs(w)) t.nodes_[w.id].grad.noalias() += g.transpose() * t.nodes_[x.id].value;
  };
  return y;
}

Var Tape::affine(Var x, Var w, Var b) {
  const Matrix& bv = node(b).value;
  if (bv.cols() != 1 || bv.rows() != node(w).value.rows())
    throw ShapeError("affine: bias must be an out x 1 column");
  Var y = affine(x, w);
  nodes_[y.id].value.rowwise() += nodes_[b.id].value.col(0).transpose();
  if (needs(b)) {
    nodes_[y.id].requires_grad = true;
    auto inner = std::move(nodes_[y.id].backprop);
    nodes_[y.id].backprop = [inner, b](Tape& t, std::size_t self) {
      if (inner) inner(t, self);
      t.nodes_[b.id].grad.col(0) += t.nodes_[self].grad.colwise().sum().transpose();
    };
  }
  return y;
}

Var Tape::relu(Var x) {
  Var y = push(node(x).value.cwiseMax(0.0), needs(x));
  nodes_[y.id].backprop = [x](Tape& t, std::size_t self) {
    const Matrix& out = t.nodes_[self].value;
    t.nodes_[x.id].grad.array() += (out.array() > 0.0).select(t.nodes_[self].grad.array(), 0.0);
  };
  return y;
}

Var Tape::row_softmax(Var scores) {
  const Matrix& s = node(scores).value;
  if (s.cols() == 0) throw DomainError("row_softmax: empty rows");
  Matrix out(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    out.row(r) = (s.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  Var y = push(std::move(out), needs(scores));
  nodes_[y.id].backprop = [scores](Tape& t, std::size_t self) {
    const Matrix& p = t.nodes_[self].value;
    const Matrix& g = t.nodes_[self].grad;
    Eigen::VectorXd dot = (p.array() * g.array()).rowwise().sum();
    t.nodes_[scores.id].grad.array() += p.array() * (g.colwise() - dot).array();
  };
  return y;
}

Var Tape::threshold(Var m, double rho) {
  const Matrix& mv = node(m).value;
  Matrix out = (mv.array() >= rho).select(mv, 0.0);
  Var y = push(std::move(out), needs(m));
  nodes_[y.id].backprop = [m, rho](Tape& t, std::size_t self) {
    const Matrix& in = t.nodes_[m.id].value;
    t.nodes_[m.id].grad.array() += (in.array() >= rho).select(t.nodes_[self].grad.array(), 0.0);
  };
  return y;
}

namespace {

void check_mask(const LinkMask& mask, Eigen::Index rows, Eigen::Index dim, const char* op) {
  if (mask.nodes == 0 || static_cast<std::size_t>(rows) != mask.groups * mask.nodes)
    throw ShapeError(std::string(op) + ": rows do not match groups x nodes of the link mask");
  if (static_cast<std::size_t>(dim) != mask.dim)
    throw ShapeError(std::string(op) + ": vector length does not match the link mask");
  if (!mask.erased.empty() && mask.erased.size() != mask.groups * mask.nodes * mask.nodes * mask.blocks())
    throw ShapeError(std::string(op) + ": link mask has the wrong number of flags");
}

// Copy of `src` as seen through link (receiver, sender).
void received(const LinkMask& mask, std::size_t g, std::size_t receiver, std::size_t sender,
              const Eigen::Ref<const Eigen::RowVectorXd>& src, Eigen::RowVectorXd& dst) {
  dst = src;
  if (mask.link_clean(g, receiver, sender)) return;
  const auto* f = mask.erased.data() + mask.offset(g, receiver, sender);
  for (std::size_t b = 0; b < mask.blocks(); ++b) {
    if (!f[b]) continue;
    const auto start = static_cast<Eigen::Index>(b * mask.block);
    const auto len = std::min<Eigen::Index>(static_cast<Eigen::Index>(mask.block), dst.size() - start);
    dst.segment(start, len).setConstant(mask.fill);
  }
}

// Zeroes the entries of `v` that were erased on link (receiver, sender).
void zero_erased(const LinkMask& mask, std::size_t g, std::size_t receiver, std::size_t sender,
                 Eigen::RowVectorXd& v) {
  if (mask.link_clean(g, receiver, sender)) return;
  const auto* f = mask.erased.data() + mask.offset(g, receiver, sender);
  for (std::size_t b = 0; b < mask.blocks(); ++b) {
    if (!f[b]) continue;
    const auto start = static_cast<Eigen::Index>(b * mask.block);
    const auto len = std::min<Eigen::Index>(static_cast<Eigen::Index>(mask.block), v.size() - start);
    v.segment(start, len).setZero();
  }
}

}  // namespace

Var Tape::bilinear_scores(Var queries, Var projected, const LinkMask& mask, double scale) {
  const Matrix& q = node(queries).value;
  const Matrix& p = node(projected).value;
  if (q.rows() != p.rows() || q.cols() != p.cols())
    throw ShapeError("bilinear_scores: queries and projected keys differ in shape");
  check_mask(mask, q.rows(), q.cols(), "bilinear_scores");
  const auto n = static_cast<Eigen::Index>(mask.nodes);
  auto shared = std::make_shared<const LinkMask>(mask);

  Matrix out(q.rows(), n);
  Eigen::RowVectorXd rx;
  for (std::size_t g = 0; g < mask.groups; ++g) {
    const auto base = static_cast<Eigen::Index>(g) * n;
    out.middleRows(base, n).noalias() = scale * q.middleRows(base, n) * p.middleRows(base, n).transpose();
    if (mask.clean()) continue;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (shared->link_clean(g, j, i)) continue;
        received(*shared, g, j, i, q.row(base + i), rx);
        out(base + i, j) = scale * rx.dot(p.row(base + j));
      }
  }

  Var y = push(std::move(out), needs(queries) || needs(projected));
  nodes_[y.id].backprop = [queries, projected, shared, scale](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& qv = t.nodes_[queries.id].value;
    const Matrix& pv = t.nodes_[projected.id].value;
    const auto n = static_cast<Eigen::Index>(shared->nodes);
    Eigen::RowVectorXd rx, gp;
    for (std::size_t g = 0; g < shared->groups; ++g) {
      const auto base = static_cast<Eigen::Index>(g) * n;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double gij = scale * G(base + i, j);
          if (gij == 0.0) continue;
          const bool clean = shared->link_clean(g, j, i);
          if (t.needs(queries)) {
            gp = gij * pv.row(base + j);
            if (!clean) zero_erased(*shared, g, j, i, gp);
            t.nodes_[queries.id].grad.row(base + i) += gp;
          }
          if (t.needs(projected)) {
            if (clean) {
              t.nodes_[projected.id].grad.row(base + j) += gij * qv.row(base + i);
            } else {
              received(*shared, g, j, i, qv.row(base + i), rx);
              t.nodes_[projected.id].grad.row(base + j) += gij * rx;
            }
          }
        }
    }
  };
  return y;
}

Var Tape::weighted_sum(Var weights, Var features, const LinkMask& mask) {
  const Matrix& w = node(weights).value;
  const Matrix& f = node(features).value;
  check_mask(mask, f.rows(), f.cols(), "weighted_sum");
  const auto n = static_cast<Eigen::Index>(mask.nodes);
  if (w.rows() != f.rows() || w.cols() != n)
    throw ShapeError("weighted_sum: weights must be (groups*nodes) x nodes");
  auto shared = std::make_shared<const LinkMask>(mask);

  Matrix out(f.rows(), f.cols());
  Eigen::RowVectorXd rx;
  for (std::size_t g = 0; g < mask.groups; ++g) {
    const auto base = static_cast<Eigen::Index>(g) * n;
    out.middleRows(base, n).noalias() = w.middleRows(base, n) * f.middleRows(base, n);
    if (mask.clean()) continue;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (shared->link_clean(g, i, j) || w(base + i, j) == 0.0) continue;
        // replace the clean contribution of j with its received version
        received(*shared, g, i, j, f.row(base + j), rx);
        out.row(base + i) += w(base + i, j) * (rx - f.row(base + j));
      }
  }

  Var y = push(std::move(out), needs(weights) || needs(features));
  nodes_[y.id].backprop = [weights, features, shared](Tape& t, std::size_t self) {
    const Matrix& G = t.nodes_[self].grad;
    const Matrix& wv = t.nodes_[weights.id].value;
    const Matrix& fv = t.nodes_[features.id].value;
    const auto n = static_cast<Eigen::Index>(shared->nodes);
    Eigen::RowVectorXd rx, gf;
    for (std::size_t g = 0; g < shared->groups; ++g) {
      const auto base = static_cast<Eigen::Index>(g) * n;
      if (t.needs(weights))
        t.nodes_[weights.id].grad.middleRows(base, n).noalias() +=
            G.middleRows(base, n) * fv.middleRows(base, n).transpose();
      if (t.needs(features))
        t.nodes_[features.id].grad.middleRows(base, n).noalias() +=
            wv.middleRows(base, n).transpose() * G.middleRows(base, n);
      if (shared->clean()) continue;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          if (shared->link_clean(g, i, j)) continue;
          if (t.needs(weights)) {
            received(*shared, g, i, j, fv.row(base + j), rx);
            t.nodes_[weights.id].grad(base + i, j) += G.row(base + i).dot(rx - fv.row(base + j));
          }
          if (t.needs(features)) {
            // undo the gradient on erased entries, which never reached i
            gf = wv(base + i, j) * G.row(base + i);
            Eigen::RowVectorXd kept = gf;
            zero_erased(*shared, g, i, j, kept);
            t.nodes_[features.id].grad.row(base + j) += kept - gf;
          }
        }
    }
  };
  return y;
}

Var Tape::cross_entropy(Var logits, std::span<const std::size_t> labels) {
  const Matrix& z = node(logits).value;
  if (static_cast<std::size_t>(z.rows()) != labels.size())
    throw ShapeError("cross_entropy: one label per row required");
  if (z.rows() == 0) throw DomainError("cross_entropy: empty batch");
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const auto label = labels[static_cast<std::size_t>(r)];
    if (label >= static_cast<std::size_t>(z.cols()))
      throw DomainError("cross_entropy: label " + std::to_string(label) + " out of range");
    const double m = z.row(r).maxCoeff();
    probs.row(r) = (z.row(r).array() - m).exp();
    const double s = probs.row(r).sum();
    probs.row(r) /= s;
    total += m + std::log(s) - z(r, static_cast<Eigen::Index>(label));
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(z.rows());
  Var y = push(std::move(out), needs(logits));
  std::vector<std::size_t> owned(labels.begin(), labels.end());
  nodes_[y.id].backprop = [logits, probs = std::move(probs), owned = std::move(owned)](
                              Tape& t, std::size_t self) {
    const double g = t.nodes_[self].grad(0, 0) / static_cast<double>(probs.rows());
    Matrix d = probs;
    for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, static_cast<Eigen::Index>(owned[static_cast<std::size_t>(r)])) -= 1.0;
    t.nodes_[logits.id].grad += g * d;
  };
  return y;
}

Var Tape::sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = node(x).value.sum();
  Var y = push(std::move(out), needs(x));
  nodes_[y.id].backprop = [x](Tape& t, std::size_t self) {
    t.nodes_[x.id].grad.array() += t.nodes_[self].grad(0, 0);
  };
  return y;
}

Var Tape::dot(Var x, Matrix coeffs) {
  const Matrix& xv = node(x).value;
  if (xv.rows() != coeffs.rows() || xv.cols() != coeffs.cols()) throw ShapeError("dot: shapes differ");
  Matrix out(1, 1);
  out(0, 0) = xv.cwiseProduct(coeffs).sum();
  Var y = push(std::move(out), needs(x));
  nodes_[y.id].backprop = [x, c = std::move(coeffs)](Tape& t, std::size_t self) {
    t.nodes_[x.id].grad += t.nodes_[self].grad(0, 0) * c;
  };
  return y;
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw StateError("backward called before any forward computation");
  const Node& l = node(loss);
  if (l.value.rows() != 1 || l.value.cols() != 1) throw StateError("backward: loss must be a scalar");
  for (auto& n : nodes_)
    if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  visits_ = 0;
  if (!l.requires_grad) return;
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    ++visits_;
    if (n.backprop) n.backprop(*this, id);
    if (!n.sink.empty()) {
      Eigen::Map<Matrix> sink(n.sink.data(), n.grad.rows(), n.grad.cols());
      sink += n.grad;
    }
  }
}

Var mlp_forward(Tape& tape, const DenseParams& params, DenseParams* grads, Var x, std::size_t first,
                std::size_t last) {
  last = std::min(last, params.layers.size());
  if (first > last) throw ShapeError("mlp_forward: bad layer range");
  if (grads && grads->layers.size() != params.layers.size())
    throw ShapeError("mlp_forward: gradient buffer does not match parameters");
  Var h = x;
  for (std::size_t l = first; l < last; ++l) {
    const auto& layer = params.layers[l];
    Var w, b;
    if (grads) {
      auto& gl = grads->layers[l];
      w = tape.parameter(layer.weight, {gl.weight.data(), static_cast<std::size_t>(gl.weight.size())});
      b = tape.parameter(Matrix(layer.bias), {gl.bias.data(), static_cast<std::size_t>(gl.bias.size())});
    } else {
      w = tape.constant(layer.weight);
      b = tape.constant(Matrix(layer.bias));
    }
    h = tape.affine(h, w, b);
    if (layer.activation == Activation::relu) h = tape.relu(h);
  }
  return h;
}

}  // namespace colinf
