#include "colinf/semgroup.hpp"

#include <cmath>
#include <string>

#include "colinf/checkpoint.hpp"
#include "colinf/error.hpp"

namespace colinf {

CommModules CommModules::build(std::size_t feature_dim, const CommCfg& cfg, Rng& rng) {
  if (cfg.query_size == 0 || cfg.key_size == 0) throw ConfigError("query and key sizes must be positive");
  std::vector<std::size_t> qw{feature_dim}, kw{feature_dim};
  qw.insert(qw.end(), cfg.hidden.begin(), cfg.hidden.end());
  kw.insert(kw.end(), cfg.hidden.begin(), cfg.hidden.end());
  qw.push_back(cfg.query_size);
  kw.push_back(cfg.key_size);
  CommModules m;
  m.query = make_mlp(qw, rng);
  m.key = make_mlp(kw, rng);
  const auto q = static_cast<Eigen::Index>(cfg.query_size);
  const auto k = static_cast<Eigen::Index>(cfg.key_size);
  const double limit = std::sqrt(6.0 / static_cast<double>(q + k));
  m.attention.resize(q, k);
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index r = 0; r < q; ++r) m.attention(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

void CommModules::validate() const {
  query.validate();
  key.validate();
  if (query.in_dim() != key.in_dim()) throw ShapeError("query and key generators read different feature sizes");
  if (static_cast<std::size_t>(attention.rows()) != query_size() ||
      static_cast<std::size_t>(attention.cols()) != key_size())
    throw ShapeError("attention weights must be Q x K");
  if (!attention.allFinite()) throw DomainError("attention weights contain a non-finite value");
}

std::vector<std::span<double>> CommModules::views() {
  auto v = query.views();
  auto k = key.views();
  v.insert(v.end(), k.begin(), k.end());
  v.emplace_back(attention.data(), static_cast<std::size_t>(attention.size()));
  return v;
}

std::vector<std::span<const double>> CommModules::views() const {
  auto v = query.views();
  auto k = key.views();
  v.insert(v.end(), k.begin(), k.end());
  v.emplace_back(attention.data(), static_cast<std::size_t>(attention.size()));
  return v;
}

CommModules zeros_like(const CommModules& m) {
  return {zeros_like(m.query), zeros_like(m.key), Matrix::Zero(m.attention.rows(), m.attention.cols())};
}

bool bit_equal(const CommModules& a, const CommModules& b) {
  return bit_equal(a.query, b.query) && bit_equal(a.key, b.key) && bit_equal(a.attention, b.attention);
}

Vector gen_query(const Vector& feature, const CommModules& m) { return mlp_forward(m.query, feature); }

Vector gen_key(const Vector& feature, const CommModules& m) { return mlp_forward(m.key, feature); }

double match_score(const Vector& local_key, const Vector& received_query, const Matrix& attention) {
  if (attention.rows() != received_query.size() || attention.cols() != local_key.size())
    throw ShapeError("match_score: attention is " + std::to_string(attention.rows()) + "x" +
                     std::to_string(attention.cols()) + ", query " + std::to_string(received_query.size()) +
                     ", key " + std::to_string(local_key.size()));
  return received_query.dot(attention * local_key) / std::sqrt(static_cast<double>(local_key.size()));
}

MatchingMatrix build_matrix(const Matrix& scores) {
  if (scores.rows() != scores.cols()) throw ShapeError("build_matrix: scores must be square");
  MatchingMatrix m;
  m.raw = scores;
  m.normalized.resize(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    m.normalized.row(i) = softmax_row(scores.row(i).transpose()).transpose();
  m.pruned = m.normalized;
  return m;
}

MatchingMatrix prune(MatchingMatrix m, double rho) {
  if (!std::isfinite(rho) || rho < 0.0) throw DomainError("prune: threshold must be finite and >= 0");
  m.rho = rho;
  m.pruned = (m.normalized.array() >= rho).select(m.normalized, 0.0);
  return m;
}

Vector combine(const Vector& weights, std::span<const Vector> received, std::size_t self,
               const Vector& local) {
  if (static_cast<std::size_t>(weights.size()) != received.size())
    throw ShapeError("combine: one weight per source required");
  if (self >= received.size()) throw ShapeError("combine: self index out of range");
  Vector out = Vector::Zero(local.size());
  for (std::size_t j = 0; j < received.size(); ++j) {
    const Vector& y = j == self ? local : received[j];
    if (y.size() != local.size()) throw ShapeError("combine: feature " + std::to_string(j) + " has the wrong length");
    const double w = weights(static_cast<Eigen::Index>(j));
    if (w != 0.0) out += w * y;
  }
  return out;
}

std::size_t count_links(const Matrix& pruned) {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < pruned.rows(); ++i)
    for (Eigen::Index j = 0; j < pruned.cols(); ++j)
      if (i != j && pruned(i, j) > 0.0) ++n;
  return n;
}

double count_connections(const Matrix& pruned) {
  if (pruned.rows() == 0) return 0.0;
  return static_cast<double>(count_links(pruned)) / static_cast<double>(pruned.rows());
}

void save_comm(const std::filesystem::path& path, const CommModules& m, std::uint64_t seed) {
  Checkpoint c;
  c.kind = "comm";
  c.seed = seed;
  c.table = {m.feature_dim(), m.query_size(), m.key_size()};
  c.stacks.emplace_back("query", m.query);
  c.stacks.emplace_back("key", m.key);
  c.matrices.emplace_back("attention", m.attention);
  save_checkpoint(path, c);
}

CommModules load_comm(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path);
  if (c.kind != "comm") throw ParseError(path.string() + ": expected a comm checkpoint, got '" + c.kind + "'");
  CommModules m{c.stack("query"), c.stack("key"), c.matrix("attention")};
  m.validate();
  return m;
}

}  // namespace colinf
