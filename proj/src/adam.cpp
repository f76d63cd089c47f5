#include "hybridflow/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hf::ad {

AdamState::AdamState(AdamOptions opts, std::span<Tensor *const> params) : options(opts) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const Tensor *p : params) {
    first_moment.emplace_back(p->numel(), 0.0);
    second_moment.emplace_back(p->numel(), 0.0);
  }
}

void adam_step(std::span<Tensor *const> params, AdamState &state) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: state tracks " +
                                std::to_string(state.first_moment.size()) + " parameters, got " +
                                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor &p = *params[i];
    if (state.first_moment[i].size() != p.numel() || state.second_moment[i].size() != p.numel() ||
        (p.grad && p.grad->size() != p.numel())) {
      throw std::invalid_argument("adam_step: shape mismatch for parameter " + std::to_string(i) +
                                  " of shape " + shape_string(p.shape));
    }
  }

  ++state.step;
  const AdamOptions &o = state.options;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor &p = *params[i];
    if (!p.grad) {
      // Zero gradient: moments decay, and m stays exactly zero if it was.
      for (std::size_t j = 0; j < p.numel(); ++j) {
        state.first_moment[i][j] *= o.beta1;
        state.second_moment[i][j] *= o.beta2;
        const double m_hat = state.first_moment[i][j] / correction1;
        const double v_hat = state.second_moment[i][j] / correction2;
        p.values[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
      }
      continue;
    }
    const auto &g = *p.grad;
    auto &m = state.first_moment[i];
    auto &v = state.second_moment[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p.values[j] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

} // namespace hf::ad
