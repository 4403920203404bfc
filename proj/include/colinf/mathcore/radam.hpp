#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace colinf {

struct RAdamHyper {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Rectified Adam state for a fixed list of parameter blocks.
class RAdamState {
 public:
  RAdamState() = default;
  RAdamState(RAdamHyper hyper, std::span<const std::size_t> block_sizes);

  const RAdamHyper& hyper() const { return hyper_; }
  RAdamHyper& hyper() { return hyper_; }
  std::uint64_t step_count() const { return t_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }

  /// Length of the approximated simple moving average at step t.
  double rho_t(std::uint64_t t) const;
  double rho_inf() const { return 2.0 / (1.0 - hyper_.beta2) - 1.0; }

 private:
  friend void radam_step(RAdamState&, std::span<const std::span<double>>,
                         std::span<const std::span<const double>>);
  RAdamHyper hyper_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

template <typename Views>
std::vector<std::size_t> block_sizes(const Views& views) {
  std::vector<std::size_t> s;
  s.reserve(views.size());
  for (const auto& v : views) s.push_back(v.size());
  return s;
}

/// One update. While rho_t <= 4 the step is -lr * m_hat; after that the
/// adaptive step is scaled by the variance rectification term. All gradients
/// are checked first; a non-finite entry throws TrainingError and nothing
/// (including the step counter) changes.
void radam_step(RAdamState& state, std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads);

}  // namespace colinf
