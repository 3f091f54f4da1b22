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

#include "ercfuse/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ercfuse/errors.hpp"

namespace ercfuse {

namespace {

using detail::Node;
using detail::NodePtr;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap view(const std::vector<double>& v, Index rows, Index cols) { return ConstMap(v.data(), rows, cols); }
MutMap view(std::vector<double>& v, Index rows, Index cols) { return MutMap(v.data(), rows, cols); }

std::string shapes(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << a.shape_string() << " and " << b.shape_string();
  return os.str();
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) fail(ErrorKind::kDimension, shapes(op, a, b));
}

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

bool tracking(std::span<const Tensor> inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

Tensor finish(const char* op, Index rows, Index cols, std::vector<double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::kNumerical, std::string(op) + " produced a non-finite value");
  }
  return Tensor(rows, cols, std::move(values));
}

void record(const Tensor& out, std::vector<NodePtr> parents, Tape::Backprop fn) {
  Tape::active()->record(out.node(), std::move(parents), std::move(fn));
}

// Gradient sink for a parent, or nullptr when it does not need one.
std::vector<double>* sink(const NodePtr& n) { return n->requires_grad ? &n->grad_buffer() : nullptr; }

template <typename F>
Tensor unary(const char* op, const Tensor& x, F&& f) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = f(v);
  return finish(op, x.rows(), x.cols(), std::move(out));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) fail(ErrorKind::kDimension, shapes("matmul", a, b));
  const Index m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m * n));
  view(out, m, n).noalias() = view(a.node()->value, m, k) * view(b.node()->value, k, n);
  Tensor result = finish("matmul", m, n, std::move(out));
  if (tracking({&a, &b})) {
    NodePtr na = a.node(), nb = b.node();
    record(result, {na, nb}, [na, nb, m, k, n](const std::vector<double>& g) {
      const auto gm = view(g, m, n);
      if (auto* ga = sink(na)) view(*ga, m, k).noalias() += gm * view(nb->value, k, n).transpose();
      if (auto* gb = sink(nb)) view(*gb, k, n).noalias() += view(na->value, m, k).transpose() * gm;
    });
  }
  return result;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) fail(ErrorKind::kDimension, shapes("matmul_nt", a, b));
  const Index m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(static_cast<std::size_t>(m * n));
  view(out, m, n).noalias() = view(a.node()->value, m, k) * view(b.node()->value, n, k).transpose();
  Tensor result = finish("matmul_nt", m, n, std::move(out));
  if (tracking({&a, &b})) {
    NodePtr na = a.node(), nb = b.node();
    record(result, {na, nb}, [na, nb, m, k, n](const std::vector<double>& g) {
      const auto gm = view(g, m, n);
      if (auto* ga = sink(na)) view(*ga, m, k).noalias() += gm * view(nb->value, n, k);
      if (auto* gb = sink(nb)) view(*gb, n, k).noalias() += gm.transpose() * view(na->value, m, k);
    });
  }
  return result;
}

Tensor linear(const Tensor& x, const Tensor& weight) { return matmul_nt(x, weight); }

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_row(matmul_nt(x, weight), bias);
}

Tensor transpose(const Tensor& a) {
  const Index m = a.rows(), n = a.cols();
  std::vector<double> out(static_cast<std::size_t>(m * n));
  view(out, n, m) = view(a.node()->value, m, n).transpose();
  Tensor result = finish("transpose", n, m, std::move(out));
  if (tracking({&a})) {
    NodePtr na = a.node();
    record(result, {na}, [na, m, n](const std::vector<double>& g) {
      if (auto* ga = sink(na)) view(*ga, m, n) += view(g, n, m).transpose();
    });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  Tensor result = finish("add", a.rows(), a.cols(), std::move(out));
  if (tracking({&a, &b})) {
    NodePtr na = a.node(), nb = b.node();
    record(result, {na, nb}, [na, nb](const std::vector<double>& g) {
      if (auto* ga = sink(na))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      if (auto* gb = sink(nb))
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
    });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  Tensor result = finish("sub", a.rows(), a.cols(), std::move(out));
  if (tracking({&a, &b})) {
    NodePtr na = a.node(), nb = b.node();
    record(result, {na, nb}, [na, nb](const std::vector<double>& g) {
      if (auto* ga = sink(na))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      if (auto* gb = sink(nb))
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Tensor result = finish("mul", a.rows(), a.cols(), std::move(out));
  if (tracking({&a, &b})) {
    NodePtr na = a.node(), nb = b.node();
    record(result, {na, nb}, [na, nb](const std::vector<double>& g) {
      if (auto* ga = sink(na))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * nb->value[i];
      if (auto* gb = sink(nb))
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * na->value[i];
    });
  }
  return result;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor result = unary("scale", a, [factor](double v) { return v * factor; });
  if (tracking({&a})) {
    NodePtr na = a.node();
    record(result, {na}, [na, factor](const std::vector<double>& g) {
      if (auto* ga = sink(na))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += factor * g[i];
    });
  }
  return result;
}

Tensor one_minus(const Tensor& a) {
  Tensor result = unary("one_minus", a, [](double v) { return 1.0 - v; });
  if (tracking({&a})) {
    NodePtr na = a.node();
    record(result, {na}, [na](const std::vector<double>& g) {
      if (auto* ga = sink(na))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] -= g[i];
    });
  }
  return result;
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) fail(ErrorKind::kDimension, shapes("add_row", a, row));
  const Index m = a.rows(), n = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto rv = row.values();
  for (Index r = 0; r < m; ++r)
    for (Index c = 0; c < n; ++c) out[static_cast<std::size_t>(r * n + c)] += rv[static_cast<std::size_t>(c)];
  Tensor result = finish("add_row", m, n, std::move(out));
  if (tracking({&a, &row})) {
    NodePtr na = a.node(), nr = row.node();
    record(result, {na, nr}, [na, nr, m, n](const std::vector<double>& g) {
      if (auto* ga = sink(na))
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
      if (auto* gr = sink(nr))
        for (Index r = 0; r < m; ++r)
          for (Index c = 0; c < n; ++c) (*gr)[static_cast<std::size_t>(c)] += g[static_cast<std::size_t>(r * n + c)];
    });
  }
  return result;
}

Tensor sigmoid(const Tensor& x) {
  Tensor result = unary("sigmoid", x, [](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  if (tracking({&x})) {
    NodePtr nx = x.node();
    Node* out = result.node().get();
    record(result, {nx}, [nx, out](const std::vector<double>& g) {
      if (auto* gx = sink(nx))
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = out->value[i];
          (*gx)[i] += g[i] * y * (1.0 - y);
        }
    });
  }
  return result;
}

Tensor tanh(const Tensor& x) {
  Tensor result = unary("tanh", x, [](double v) { return std::tanh(v); });
  if (tracking({&x})) {
    NodePtr nx = x.node();
    Node* out = result.node().get();
    record(result, {nx}, [nx, out](const std::vector<double>& g) {
      if (auto* gx = sink(nx))
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = out->value[i];
          (*gx)[i] += g[i] * (1.0 - y * y);
        }
    });
  }
  return result;
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor leaky_relu(const Tensor& x, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) fail(ErrorKind::kConfig, "leaky_relu slope must lie in [0, 1)");
  Tensor result = unary("leaky_relu", x, [slope](double v) { return v >= 0.0 ? v : slope * v; });
  if (tracking({&x})) {
    NodePtr nx = x.node();
    record(result, {nx}, [nx, slope](const std::vector<double>& g) {
      if (auto* gx = sink(nx))
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += nx->value[i] >= 0.0 ? g[i] : slope * g[i];
    });
  }
  return result;
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorKind::kContract, "concat_cols of nothing");
  const Index m = parts[0].rows();
  Index n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) fail(ErrorKind::kDimension, shapes("concat_cols", parts[0], p));
    n += p.cols();
  }
  std::vector<double> out(static_cast<std::size_t>(m * n));
  std::vector<Index> offsets;
  Index offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    view(out, m, n).middleCols(offset, p.cols()) = view(p.node()->value, m, p.cols());
    offset += p.cols();
  }
  Tensor result = finish("concat_cols", m, n, std::move(out));
  if (tracking(parts)) {
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    record(result, nodes, [nodes, offsets, m, n](const std::vector<double>& g) {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (auto* gp = sink(nodes[i])) view(*gp, m, nodes[i]->cols) += view(g, m, n).middleCols(offsets[i], nodes[i]->cols);
      }
    });
  }
  return result;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorKind::kContract, "concat_rows of nothing");
  const Index n = parts[0].cols();
  Index m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) fail(ErrorKind::kDimension, shapes("concat_rows", parts[0], p));
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m * n));
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  Tensor result = finish("concat_rows", m, n, std::move(out));
  if (tracking(parts)) {
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    record(result, nodes, [nodes](const std::vector<double>& g) {
      std::size_t offset = 0;
      for (const auto& node : nodes) {
        if (auto* gp = sink(node))
          for (std::size_t i = 0; i < node->value.size(); ++i) (*gp)[i] += g[offset + i];
        offset += node->value.size();
      }
    });
  }
  return result;
}

Tensor slice_cols(const Tensor& x, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > x.cols()) {
    fail(ErrorKind::kDimension, "slice_cols range out of bounds for " + x.shape_string());
  }
  const Index m = x.rows(), n = x.cols();
  std::vector<double> out(static_cast<std::size_t>(m * count));
  view(out, m, count) = view(x.node()->value, m, n).middleCols(begin, count);
  Tensor result = finish("slice_cols", m, count, std::move(out));
  if (tracking({&x})) {
    NodePtr nx = x.node();
    record(result, {nx}, [nx, m, n, begin, count](const std::vector<double>& g) {
      if (auto* gx = sink(nx)) view(*gx, m, n).middleCols(begin, count) += view(g, m, count);
    });
  }
  return result;
}

Tensor slice_rows(const Tensor& x, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > x.rows()) {
    fail(ErrorKind::kDimension, "slice_rows range out of bounds for " + x.shape_string());
  }
  const Index n = x.cols();
  const auto first = x.values().begin() + begin * n;
  std::vector<double> out(first, first + count * n);
  Tensor result = finish("slice_rows", count, n, std::move(out));
  if (tracking({&x})) {
    NodePtr nx = x.node();
    record(result, {nx}, [nx, n, begin](const std::vector<double>& g) {
      if (auto* gx = sink(nx))
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[static_cast<std::size_t>(begin * n) + i] += g[i];
    });
  }
  return result;
}

Tensor gather_rows(const Tensor& x, std::span<const Index> index) {
  const Index n = x.cols();
  const auto rows = static_cast<Index>(index.size());
  std::vector<double> out(static_cast<std::size_t>(rows * n));
  for (Index r = 0; r < rows; ++r) {
    const Index src = index[static_cast<std::size_t>(r)];
    if (src < 0 || src >= x.rows()) fail(ErrorKind::kContract, "gather_rows index out of range");
    std::copy_n(x.values().begin() + src * n, n, out.begin() + r * n);
  }
  Tensor result = finish("gather_rows", rows, n, std::move(out));
  if (tracking({&x})) {
    NodePtr nx = x.node();
    std::vector<Index> idx(index.begin(), index.end());
    record(result, {nx}, [nx, idx = std::move(idx), n](const std::vector<double>& g) {
      if (auto* gx = sink(nx))
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (Index c = 0; c < n; ++c)
            (*gx)[static_cast<std::size_t>(idx[r] * n + c)] += g[r * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)];
    });
  }
  return result;
}

Tensor scatter_add_rows(const Tensor& x, std::span<const Index> index, Index num_rows) {
  if (static_cast<Index>(index.size()) != x.rows()) fail(ErrorKind::kDimension, "scatter_add_rows index length mismatch");
  const Index n = x.cols();
  std::vector<double> out(static_cast<std::size_t>(num_rows * n), 0.0);
  for (Index r = 0; r < x.rows(); ++r) {
    const Index dst = index[static_cast<std::size_t>(r)];
    if (dst < 0 || dst >= num_rows) fail(ErrorKind::kContract, "scatter_add_rows index out of range");
    for (Index c = 0; c < n; ++c) out[static_cast<std::size_t>(dst * n + c)] += x(r, c);
  }
  Tensor result = finish("scatter_add_rows", num_rows, n, std::move(out));
  if (tracking({&x})) {
    NodePtr nx = x.node();
    std::vector<Index> idx(index.begin(), index.end());
    record(result, {nx}, [nx, idx = std::move(idx), n](const std::vector<double>& g) {
      if (auto* gx = sink(nx))
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (Index c = 0; c < n; ++c)
            (*gx)[r * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)] += g[static_cast<std::size_t>(idx[r] * n + c)];
    });
  }
  return result;
}

Tensor scale_rows(const Tensor& x, const Tensor& weights) {
  if (weights.rows() != x.rows() || weights.cols() != 1) fail(ErrorKind::kDimension, shapes("scale_rows", x, weights));
  const Index m = x.rows(), n = x.cols();
  std::vector<double> out(x.values().begin(), x.values().end());
  for (Index r = 0; r < m; ++r)
    for (Index c = 0; c < n; ++c) out[static_cast<std::size_t>(r * n + c)] *= weights(r, 0);
  Tensor result = finish("scale_rows", m, n, std::move(out));
  if (tracking({&x, &weights})) {
    NodePtr nx = x.node(), nw = weights.node();
    record(result, {nx, nw}, [nx, nw, m, n](const std::vector<double>& g) {
      auto* gx = sink(nx);
      auto* gw = sink(nw);
      for (Index r = 0; r < m; ++r) {
        const double w = nw->value[static_cast<std::size_t>(r)];
        for (Index c = 0; c < n; ++c) {
          const auto i = static_cast<std::size_t>(r * n + c);
          if (gx) (*gx)[i] += g[i] * w;
          if (gw) (*gw)[static_cast<std::size_t>(r)] += g[i] * nx->value[i];
        }
      }
    });
  }
  return result;
}

Tensor softmax_rows(const Tensor& x, const Mask* mask) {
  const Index m = x.rows(), n = x.cols();
  if (mask != nullptr && (mask->rows != m || mask->cols != n)) fail(ErrorKind::kDimension, "softmax_rows mask shape mismatch");
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  for (Index r = 0; r < m; ++r) {
    double row_max = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (Index c = 0; c < n; ++c) {
      if (mask != nullptr && !(*mask)(r, c)) continue;
      row_max = std::max(row_max, x(r, c));
      any = true;
    }
    if (!any) fail(ErrorKind::kDegenerate, "softmax_rows row " + std::to_string(r) + " has no unmasked entry");
    double total = 0.0;
    for (Index c = 0; c < n; ++c) {
      if (mask != nullptr && !(*mask)(r, c)) continue;
      const double e = std::exp(x(r, c) - row_max);
      out[static_cast<std::size_t>(r * n + c)] = e;
      total += e;
    }
    for (Index c = 0; c < n; ++c) out[static_cast<std::size_t>(r * n + c)] /= total;
  }
  Tensor result = finish("softmax_rows", m, n, std::move(out));
  if (tracking({&x})) {
    NodePtr nx = x.node();
    Node* y = result.node().get();
    record(result, {nx}, [nx, y, m, n](const std::vector<double>& g) {
      auto* gx = sink(nx);
      if (!gx) return;
      for (Index r = 0; r < m; ++r) {
        double dot = 0.0;
        for (Index c = 0; c < n; ++c) {
          const auto i = static_cast<std::size_t>(r * n + c);
          dot += g[i] * y->value[i];
        }
        for (Index c = 0; c < n; ++c) {
          const auto i = static_cast<std::size_t>(r * n + c);
          (*gx)[i] += y->value[i] * (g[i] - dot);
        }
      }
    });
  }
  return result;
}

Tensor segment_softmax(const Tensor& scores, std::span<const Index> segment, Index num_segments) {
  if (scores.cols() != 1 || static_cast<Index>(segment.size()) != scores.rows()) {
    fail(ErrorKind::kDimension, "segment_softmax expects an E×1 score column with E segment ids");
  }
  const auto count = segment.size();
  std::vector<double> seg_max(static_cast<std::size_t>(num_segments), -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < count; ++e) {
    const Index s = segment[e];
    if (s < 0 || s >= num_segments) fail(ErrorKind::kContract, "segment id out of range");
    seg_max[static_cast<std::size_t>(s)] = std::max(seg_max[static_cast<std::size_t>(s)], scores.values()[e]);
  }
  std::vector<double> out(count);
  std::vector<double> seg_sum(static_cast<std::size_t>(num_segments), 0.0);
  for (std::size_t e = 0; e < count; ++e) {
    const auto s = static_cast<std::size_t>(segment[e]);
    out[e] = std::exp(scores.values()[e] - seg_max[s]);
    seg_sum[s] += out[e];
  }
  for (std::size_t e = 0; e < count; ++e) out[e] /= seg_sum[static_cast<std::size_t>(segment[e])];
  Tensor result = finish("segment_softmax", scores.rows(), 1, std::move(out));
  if (tracking({&scores})) {
    NodePtr ns = scores.node();
    Node* y = result.node().get();
    std::vector<Index> seg(segment.begin(), segment.end());
    record(result, {ns}, [ns, y, seg = std::move(seg), num_segments](const std::vector<double>& g) {
      auto* gs = sink(ns);
      if (!gs) return;
      std::vector<double> dot(static_cast<std::size_t>(num_segments), 0.0);
      for (std::size_t e = 0; e < seg.size(); ++e) dot[static_cast<std::size_t>(seg[e])] += g[e] * y->value[e];
      for (std::size_t e = 0; e < seg.size(); ++e)
        (*gs)[e] += y->value[e] * (g[e] - dot[static_cast<std::size_t>(seg[e])]);
    });
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const Index m = x.rows(), n = x.cols();
  if (n < 1) fail(ErrorKind::kDimension, "layer_norm needs at least one column");
  if (gain.rows() != 1 || gain.cols() != n) fail(ErrorKind::kDimension, shapes("layer_norm gain", x, gain));
  if (bias.rows() != 1 || bias.cols() != n) fail(ErrorKind::kDimension, shapes("layer_norm bias", x, bias));
  std::vector<double> normalized(static_cast<std::size_t>(m * n));
  std::vector<double> inv_std(static_cast<std::size_t>(m));
  std::vector<double> out(static_cast<std::size_t>(m * n));
  for (Index r = 0; r < m; ++r) {
    double mu = 0.0;
    for (Index c = 0; c < n; ++c) mu += x(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (Index c = 0; c < n; ++c) var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    for (Index c = 0; c < n; ++c) {
      const auto i = static_cast<std::size_t>(r * n + c);
      normalized[i] = (x(r, c) - mu) * is;
      out[i] = normalized[i] * gain(0, c) + bias(0, c);
    }
  }
  Tensor result = finish("layer_norm", m, n, std::move(out));
  if (tracking({&x, &gain, &bias})) {
    NodePtr nx = x.node(), ng = gain.node(), nb = bias.node();
    record(result, {nx, ng, nb},
           [nx, ng, nb, normalized = std::move(normalized), inv_std = std::move(inv_std), m, n](const std::vector<double>& g) {
             auto* gx = sink(nx);
             auto* gg = sink(ng);
             auto* gb = sink(nb);
             const double dn = static_cast<double>(n);
             for (Index r = 0; r < m; ++r) {
               double sum_d = 0.0, sum_dx = 0.0;
               for (Index c = 0; c < n; ++c) {
                 const auto i = static_cast<std::size_t>(r * n + c);
                 const double d = g[i] * ng->value[static_cast<std::size_t>(c)];
                 sum_d += d;
                 sum_dx += d * normalized[i];
                 if (gg) (*gg)[static_cast<std::size_t>(c)] += g[i] * normalized[i];
                 if (gb) (*gb)[static_cast<std::size_t>(c)] += g[i];
               }
               if (!gx) continue;
               const double is = inv_std[static_cast<std::size_t>(r)];
               for (Index c = 0; c < n; ++c) {
                 const auto i = static_cast<std::size_t>(r * n + c);
                 const double d = g[i] * ng->value[static_cast<std::size_t>(c)];
                 (*gx)[i] += is / dn * (dn * d - sum_d - normalized[i] * sum_dx);
               }
             }
           });
  }
  return result;
}

Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorKind::kConfig, "dropout rate must lie in [0, 1)");
  if (mode == Mode::kEval || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double factor = 1.0 / (1.0 - rate);
  std::vector<double> multiplier(static_cast<std::size_t>(x.size()));
  for (double& v : multiplier) v = keep(rng) ? factor : 0.0;
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= multiplier[i];
  Tensor result = finish("dropout", x.rows(), x.cols(), std::move(out));
  if (tracking({&x})) {
    NodePtr nx = x.node();
    record(result, {nx}, [nx, multiplier = std::move(multiplier)](const std::vector<double>& g) {
      if (auto* gx = sink(nx))
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * multiplier[i];
    });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor result = finish("sum", 1, 1, {total});
  if (tracking({&x})) {
    NodePtr nx = x.node();
    record(result, {nx}, [nx](const std::vector<double>& g) {
      if (auto* gx = sink(nx))
        for (double& v : *gx) v += g[0];
    });
  }
  return result;
}

Tensor mean(const Tensor& x) {
  if (x.empty()) fail(ErrorKind::kContract, "mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor nll_loss(const Tensor& probs, std::span<const int> labels, double normalizer, double clamp) {
  if (static_cast<Index>(labels.size()) != probs.rows()) fail(ErrorKind::kDimension, "nll_loss label count mismatch");
  if (!(normalizer > 0.0)) fail(ErrorKind::kContract, "nll_loss normalizer must be positive");
  const Index c = probs.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int y = labels[r];
    if (y < 0 || y >= c) fail(ErrorKind::kContract, "nll_loss label out of range");
    total -= std::log(std::max(probs(static_cast<Index>(r), y), clamp));
  }
  Tensor result = finish("nll_loss", 1, 1, {total / normalizer});
  if (tracking({&probs})) {
    NodePtr np = probs.node();
    std::vector<int> ys(labels.begin(), labels.end());
    record(result, {np}, [np, ys = std::move(ys), c, normalizer, clamp](const std::vector<double>& g) {
      auto* gp = sink(np);
      if (!gp) return;
      for (std::size_t r = 0; r < ys.size(); ++r) {
        const auto i = r * static_cast<std::size_t>(c) + static_cast<std::size_t>(ys[r]);
        const double p = np->value[i];
        if (p > clamp) (*gp)[i] -= g[0] / (normalizer * p);
      }
    });
  }
  return result;
}

}  // namespace ercfuse
