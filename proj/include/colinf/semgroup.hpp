#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "colinf/mathcore/dense.hpp"
#include "colinf/rng.hpp"

namespace colinf {

struct CommCfg {
  std::size_t query_size = 64;
  std::size_t key_size = 1024;
  std::vector<std::size_t> hidden = {256, 128};
};

/// The only trainable parameters once the backbone is frozen: the query
/// generator, the key generator and the Q x K attention weights.
struct CommModules {
  DenseParams query;
  DenseParams key;
  Matrix attention;

  static CommModules build(std::size_t feature_dim, const CommCfg& cfg, Rng& rng);

  std::size_t feature_dim() const { return query.in_dim(); }
  std::size_t query_size() const { return query.out_dim(); }
  std::size_t key_size() const { return key.out_dim(); }
  void validate() const;

  std::vector<std::span<double>> views();
  std::vector<std::span<const double>> views() const;
};

CommModules zeros_like(const CommModules& m);
bool bit_equal(const CommModules& a, const CommModules& b);

Vector gen_query(const Vector& feature, const CommModules& m);
Vector gen_key(const Vector& feature, const CommModules& m);

/// Scaled general attention between the local key and a received query:
/// key^T * attention^T * query / sqrt(K).
double match_score(const Vector& local_key, const Vector& received_query, const Matrix& attention);

struct MatchingMatrix {
  Matrix raw;         // scores, (i, j) = source j for destination i
  Matrix normalized;  // row-wise softmax of raw
  Matrix pruned;      // normalized * 1{normalized >= rho}
  double rho = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(raw.rows()); }
};

MatchingMatrix build_matrix(const Matrix& scores);

/// Entries below rho are zeroed. Survivors keep their value; rows are not
/// renormalized. Throws DomainError for rho < 0 or non-finite rho.
MatchingMatrix prune(MatchingMatrix m, double rho);

/// Weighted sum of `received[j]` over sources j, with the local feature used in
/// place of `received[self]`.
Vector combine(const Vector& weights, std::span<const Vector> received, std::size_t self,
               const Vector& local);

/// Surviving off-diagonal entries (one unicast each).
std::size_t count_links(const Matrix& pruned);

/// count_links / N.
double count_connections(const Matrix& pruned);

void save_comm(const std::filesystem::path& path, const CommModules& m, std::uint64_t seed);
CommModules load_comm(const std::filesystem::path& path);

}  // namespace colinf
