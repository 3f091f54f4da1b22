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

// Reference implementations written as plain loops over std::vector, shared
// by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ercfuse/mdgat.hpp"
#include "ercfuse/mpcat.hpp"
#include "support.hpp"

namespace ercfuse::testing {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Tensor& t) {
  Mat m(static_cast<std::size_t>(t.rows()), std::vector<double>(static_cast<std::size_t>(t.cols())));
  for (Index r = 0; r < t.rows(); ++r)
    for (Index c = 0; c < t.cols(); ++c) m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = t(r, c);
  return m;
}

inline std::vector<double> matvec(const Tensor& w, const std::vector<double>& v) {
  std::vector<double> out(static_cast<std::size_t>(w.rows()), 0.0);
  for (Index r = 0; r < w.rows(); ++r)
    for (Index c = 0; c < w.cols(); ++c) out[static_cast<std::size_t>(r)] += w(r, c) * v[static_cast<std::size_t>(c)];
  return out;
}

inline std::vector<double> cat_vec(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Direct loop transcription of one graph-attention layer: GATv2 scores over
// the window neighbourhood, softmax, weighted messages, update, merge,
// residual, layer norm.
inline Mat naive_layer(const Mat& x, Index past, Index future, const MdgatLayerParams& p, UpdateRule rule, double slope,
                double eps) {
  const auto m = static_cast<Index>(x.size());
  Mat out;
  for (Index i = 0; i < m; ++i) {
    const auto& xi = x[static_cast<std::size_t>(i)];
    std::vector<double> heads;
    for (const auto& h : p.heads) {
      std::vector<Index> nb;
      for (Index j = 0; j < m; ++j)
        if (j != i && j >= i - past && j <= i + future) nb.push_back(j);
      std::vector<double> scores;
      for (Index j : nb) {
        auto hidden = matvec(h.w_edge, cat_vec(xi, x[static_cast<std::size_t>(j)]));
        for (double& v : hidden) v = v >= 0.0 ? v : slope * v;
        double s = 0.0;
        for (std::size_t k = 0; k < hidden.size(); ++k) s += h.attention(0, static_cast<Index>(k)) * hidden[k];
        scores.push_back(s);
      }
      std::vector<double> msg(static_cast<std::size_t>(h.w_pass.rows()), 0.0);
      if (!nb.empty()) {
        const double top = *std::max_element(scores.begin(), scores.end());
        double z = 0.0;
        for (double s : scores) z += std::exp(s - top);
        for (std::size_t e = 0; e < nb.size(); ++e) {
          const double mu = std::exp(scores[e] - top) / z;
          const auto v = matvec(h.w_pass, x[static_cast<std::size_t>(nb[e])]);
          for (std::size_t k = 0; k < msg.size(); ++k) msg[k] += mu * v[k];
        }
      }
      std::vector<double> upd;
      if (rule == UpdateRule::kSum) {
        upd = matvec(h.w_update0, msg);
        const auto b = matvec(h.w_update1, xi);
        for (std::size_t k = 0; k < upd.size(); ++k) upd[k] += b[k];
      } else if (rule == UpdateRule::kConcat) {
        upd = matvec(h.w_update0, cat_vec(msg, xi));
      } else {
        std::vector<double> s(xi.size()), q(xi.size());
        for (std::size_t k = 0; k < xi.size(); ++k) {
          s[k] = msg[k] + xi[k];
          q[k] = msg[k] * xi[k];
        }
        upd = matvec(h.w_update0, cat_vec(s, q));
      }
      heads.insert(heads.end(), upd.begin(), upd.end());
    }
    auto y = matvec(p.w_merge, heads);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += xi[k];
    double mean = 0.0, var = 0.0;
    for (double v : y) mean += v / static_cast<double>(y.size());
    for (double v : y) var += (v - mean) * (v - mean) / static_cast<double>(y.size());
    for (std::size_t k = 0; k < y.size(); ++k)
      y[k] = (y[k] - mean) / std::sqrt(var + eps) * p.norm_gain(0, static_cast<Index>(k)) +
             p.norm_bias(0, static_cast<Index>(k));
    out.push_back(y);
  }
  return out;
}

inline MdgatLayerParams random_gat_layer(Index dim, Index heads, Index score, Index msg, UpdateRule rule, Rng& rng) {
  const Index out = dim / heads;
  MdgatLayerParams p;
  for (Index h = 0; h < heads; ++h) {
    GatHeadParams head;
    head.w_edge = random_tensor(score, 2 * dim, rng, 0.7);
    head.attention = random_tensor(1, score, rng, 0.7);
    head.w_pass = random_tensor(msg, dim, rng, 0.7);
    if (rule == UpdateRule::kSum) {
      head.w_update0 = random_tensor(out, msg, rng, 0.7);
      head.w_update1 = random_tensor(out, dim, rng, 0.7);
    } else if (rule == UpdateRule::kConcat) {
      head.w_update0 = random_tensor(out, msg + dim, rng, 0.7);
    } else {
      head.w_update0 = random_tensor(out, 2 * dim, rng, 0.7);
    }
    p.heads.push_back(head);
  }
  p.w_merge = random_tensor(dim, heads * out, rng, 0.7);
  p.norm_gain = random_tensor(1, dim, rng, 0.5);
  p.norm_bias = random_tensor(1, dim, rng, 0.5);
  return p;
}



// rows of x times wᵀ, plus an optional bias row
inline Mat project(const Mat& x, const Tensor& w, const Tensor* bias = nullptr) {
  Mat out(x.size(), std::vector<double>(static_cast<std::size_t>(w.rows()), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (Index r = 0; r < w.rows(); ++r) {
      double s = bias ? (*bias)(0, r) : 0.0;
      for (Index c = 0; c < w.cols(); ++c) s += w(r, c) * x[i][static_cast<std::size_t>(c)];
      out[i][static_cast<std::size_t>(r)] = s;
    }
  return out;
}

inline Mat naive_attention(const Mat& q, const Mat& kv, const AttentionParams& p) {
  const std::size_t m = q.size();
  Mat heads(m);
  for (std::size_t h = 0; h < p.w_query.size(); ++h) {
    const Mat qq = project(q, p.w_query[h]), kk = project(kv, p.w_key[h]), vv = project(kv, p.w_value[h]);
    const double scale = std::sqrt(static_cast<double>(kk[0].size()));
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> s(kv.size());
      double top = -1e300;
      for (std::size_t j = 0; j < kv.size(); ++j) {
        double d = 0.0;
        for (std::size_t c = 0; c < qq[i].size(); ++c) d += qq[i][c] * kk[j][c];
        s[j] = d / scale;
        top = std::max(top, s[j]);
      }
      double z = 0.0;
      for (double& v : s) z += (v = std::exp(v - top));
      for (std::size_t c = 0; c < vv[0].size(); ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < kv.size(); ++j) acc += s[j] / z * vv[j][c];
        heads[i].push_back(acc);
      }
    }
  }
  return project(heads, p.w_merge);
}

inline Mat naive_norm(Mat x, const Tensor& g, const Tensor& b, double eps) {
  for (auto& row : x) {
    double mean = 0.0, var = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    for (std::size_t c = 0; c < row.size(); ++c)
      row[c] = (row[c] - mean) / std::sqrt(var + eps) * g(0, static_cast<Index>(c)) + b(0, static_cast<Index>(c));
  }
  return x;
}

inline Mat add(Mat a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t c = 0; c < a[i].size(); ++c) a[i][c] += b[i][c];
  return a;
}

inline Mat naive_block(const Mat& self, const std::vector<Mat>& others, const MpcatBlockParams& p, double eps) {
  Mat pa(self.size(), std::vector<double>(self[0].size(), 0.0));
  for (std::size_t b = 0; b < others.size(); ++b) pa = add(pa, naive_attention(others[b], self, p.branches[b]));
  const Mat mixed = naive_norm(add(self, pa), p.norm1_gain, p.norm1_bias, eps);
  Mat hidden = project(mixed, p.feed_forward.w0, &p.feed_forward.b0);
  for (auto& row : hidden)
    for (double& v : row) v = std::max(v, 0.0);
  return naive_norm(add(mixed, project(hidden, p.feed_forward.w1, &p.feed_forward.b1)), p.norm2_gain, p.norm2_bias,
                    eps);
}

inline AttentionParams random_attention(Index dim, Index heads, Rng& rng, double scale = 0.6) {
  const Index dk = dim / heads;
  AttentionParams p;
  for (Index h = 0; h < heads; ++h) {
    p.w_query.push_back(random_tensor(dk, dim, rng, scale));
    p.w_key.push_back(random_tensor(dk, dim, rng, scale));
    p.w_value.push_back(random_tensor(dk, dim, rng, scale));
  }
  p.w_merge = random_tensor(dim, heads * dk, rng, scale);
  return p;
}

inline MpcatBlockParams random_block(Index dim, Index heads, std::size_t branches, Rng& rng) {
  MpcatBlockParams p;
  for (std::size_t b = 0; b < branches; ++b) p.branches.push_back(random_attention(dim, heads, rng));
  p.norm1_gain = random_tensor(1, dim, rng, 0.5);
  p.norm1_bias = random_tensor(1, dim, rng, 0.5);
  p.norm2_gain = random_tensor(1, dim, rng, 0.5);
  p.norm2_bias = random_tensor(1, dim, rng, 0.5);
  p.feed_forward = {random_tensor(dim, dim, rng), random_tensor(1, dim, rng), random_tensor(dim, dim, rng),
                    random_tensor(1, dim, rng)};
  return p;
}

inline MpcatLayerParams random_cross_layer(Index dim, Index heads, std::size_t modalities, Rng& rng) {
  MpcatLayerParams layer;
  for (std::size_t i = 0; i < modalities; ++i) layer.blocks.push_back(random_block(dim, heads, modalities - 1, rng));
  return layer;
}

inline double diff(const Tensor& a, const Mat& b) {
  double worst = 0.0;
  for (Index r = 0; r < a.rows(); ++r)
    for (Index c = 0; c < a.cols(); ++c)
      worst = std::max(worst, std::abs(a(r, c) - b[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]));
  return worst;
}

}  // namespace ercfuse::testing
