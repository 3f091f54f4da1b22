/*
 * Copyright (c) 2026 The ercfuse Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ercfuse/optim.hpp"

#include <cmath>

#include "ercfuse/errors.hpp"

namespace ercfuse {

AdamWState::AdamWState(std::span<const Tensor> params, AdamWOptions opts) : options(opts) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const auto& p : params) {
    first_moment.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
    second_moment.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
  }
}

void adamw_step(std::span<Tensor> params, AdamWState& state) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    fail(ErrorKind::kState, "optimizer state tracks " + std::to_string(state.first_moment.size()) +
                                " parameters but " + std::to_string(params.size()) + " were given");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.first_moment[k].size() != static_cast<std::size_t>(params[k].size()) ||
        state.second_moment[k].size() != static_cast<std::size_t>(params[k].size())) {
      fail(ErrorKind::kState, "optimizer moment shape mismatch for parameter " + std::to_string(k));
    }
  }
  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k].values();
    const auto grad = params[k].grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= o.lr * (m_hat / (std::sqrt(v_hat) + o.eps) + o.weight_decay * value[i]);
    }
  }
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

double grad_norm(std::span<const Tensor> params) {
  double total = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) total += g * g;
  return std::sqrt(total);
}

void clip_grad_norm(std::span<Tensor> params, double max_norm) {
  const double norm = grad_norm(params);
  if (!(norm > max_norm) || norm == 0.0) return;
  const double factor = max_norm / norm;
  for (auto& p : params)
    for (double& g : p.grad()) g *= factor;
}

}  // namespace ercfuse
