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

// Helpers shared by the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ercfuse/gradcheck.hpp"
#include "ercfuse/ops.hpp"
#include "ercfuse/tensor.hpp"

namespace ercfuse::testing {

inline Tensor random_tensor(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

inline Tensor random_parameter(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::parameter(rows, cols);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Largest relative error between backprop and central differences over
/// every coordinate of every input. Inputs are made leaf tensors that
/// require grad; their gradients are reset first.
inline double fd_max_error(std::vector<Tensor>& inputs, const ScalarFn& f, double h = 1e-6) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tape tape;
  Tensor loss;
  {
    const auto scope = tape.activate();
    loss = f(inputs);
  }
  tape.backward(loss);
  double worst = 0.0;
  for (auto& t : inputs) {
    auto values = t.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double analytic = t.has_grad() ? t.grad()[i] : 0.0;
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f(inputs).item();
      values[i] = saved - h;
      const double down = f(inputs).item();
      values[i] = saved;
      worst = std::max(worst, relative_error(analytic, (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

/// sum(y ⊙ r) for a fixed random r, so every output entry gets a distinct
/// upstream gradient.
inline Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(y * random_tensor(y.rows(), y.cols(), rng));
}

}  // namespace ercfuse::testing
