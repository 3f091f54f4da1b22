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

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "ercfuse/tensor.hpp"

namespace ercfuse {

enum class Mode { kTrain, kEval };

/// Visibility mask for `softmax_rows`; nonzero entries take part.
struct Mask {
  Index rows = 0;
  Index cols = 0;
  std::vector<std::uint8_t> keep;

  Mask(Index r, Index c, bool visible = true)
      : rows(r), cols(c), keep(static_cast<std::size_t>(r * c), visible ? 1 : 0) {}
  bool operator()(Index r, Index c) const { return keep[static_cast<std::size_t>(r * cols + c)] != 0; }
  void set(Index r, Index c, bool visible) { keep[static_cast<std::size_t>(r * cols + c)] = visible ? 1 : 0; }
};

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a·bᵀ.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// Row-wise affine map x·Wᵀ (+ b) for weights stored as (out × in).
Tensor linear(const Tensor& x, const Tensor& weight);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor transpose(const Tensor& a);

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// Adds a 1×n row to every row of a.
Tensor add_row(const Tensor& a, const Tensor& row);
/// 1 - a
Tensor one_minus(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

// Activations.
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
/// max(x, slope·x); the derivative at exactly 0 is taken as 1.
Tensor leaky_relu(const Tensor& x, double slope);

// Shape manipulation.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, Index begin, Index count);
Tensor slice_rows(const Tensor& x, Index begin, Index count);
/// out[r] = x[index[r]].
Tensor gather_rows(const Tensor& x, std::span<const Index> index);
/// out[index[r]] += x[r] over an output of `num_rows` rows.
Tensor scatter_add_rows(const Tensor& x, std::span<const Index> index, Index num_rows);
/// Multiplies row r of x (E×d) by weights[r] (weights is E×1).
Tensor scale_rows(const Tensor& x, const Tensor& weights);

// Normalisation and regularisation.
/// Row softmax, stabilised by the row max. Masked entries are exactly zero;
/// a row with no visible entry raises ErrorKind::kDegenerate.
Tensor softmax_rows(const Tensor& x, const Mask* mask = nullptr);
/// Softmax of an E×1 column within groups sharing the same `segment` id.
/// Segments with no members simply produce nothing.
Tensor segment_softmax(const Tensor& scores, std::span<const Index> segment, Index num_segments);
/// Per-row layer normalisation with population variance; gain/bias are 1×n.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
/// Inverted dropout; identity in eval mode or at rate 0.
Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// -(1/normalizer) Σ_r log max(p[r, label[r]], clamp).
Tensor nll_loss(const Tensor& probs, std::span<const int> labels, double normalizer, double clamp = 1e-12);

}  // namespace ercfuse
