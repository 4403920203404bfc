#include "colinf/mathcore/radam.hpp"

#include <cmath>
#include <string>

#include "colinf/error.hpp"

namespace colinf {

RAdamState::RAdamState(RAdamHyper hyper, std::span<const std::size_t> block_sizes) : hyper_(hyper) {
  m_.reserve(block_sizes.size());
  v_.reserve(block_sizes.size());
  for (auto n : block_sizes) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

double RAdamState::rho_t(std::uint64_t t) const {
  const double b2t = std::pow(hyper_.beta2, static_cast<double>(t));
  return rho_inf() - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

void radam_step(RAdamState& state, std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads) {
  if (params.size() != state.m_.size() || grads.size() != state.m_.size())
    throw ShapeError("radam_step: expected " + std::to_string(state.m_.size()) + " parameter blocks");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != state.m_[b].size() || grads[b].size() != state.m_[b].size())
      throw ShapeError("radam_step: block " + std::to_string(b) + " changed size");
    for (double g : grads[b])
      if (!std::isfinite(g))
        throw TrainingError("radam_step: non-finite gradient in block " + std::to_string(b));
  }

  const auto& h = state.hyper_;
  const std::uint64_t t = ++state.t_;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  const double rho = state.rho_t(t);
  const double rinf = state.rho_inf();
  const bool rectified = rho > 4.0;
  const double r = rectified ? std::sqrt((rho - 4.0) * (rho - 2.0) * rinf /
                                         ((rinf - 4.0) * (rinf - 2.0) * rho))
                             : 0.0;

  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m_[b];
    auto& v = state.v_[b];
    auto p = params[b];
    auto g = grads[b];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g[k];
      v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      if (rectified) {
        const double v_hat = v[k] / bc2;
        p[k] -= h.lr * r * m_hat / (std::sqrt(v_hat) + h.eps);
      } else {
        p[k] -= h.lr * m_hat;
      }
    }
  }
}

}  // namespace colinf
