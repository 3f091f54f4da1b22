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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ercfuse {

using Index = std::ptrdiff_t;
using Rng = std::mt19937_64;

namespace detail {

struct Node {
  Index rows = 0;
  Index cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient flows in
  bool requires_grad = false;
  bool leaf = true;
  const void* tape = nullptr;  // owning tape for recorded (non-leaf) nodes
  std::size_t tape_position = 0;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

/// Dense row-major 2-D array of doubles. A Tensor is a handle: copies share
/// storage and gradient, `clone()` makes an independent copy. Vectors are
/// 1×n rows.
class Tensor {
 public:
  Tensor();
  Tensor(Index rows, Index cols, double fill = 0.0);
  Tensor(Index rows, Index cols, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor row_vector(std::vector<double> values);
  /// Zero-filled trainable leaf with an allocated (zero) gradient.
  static Tensor parameter(Index rows, Index cols);

  Index rows() const { return node_->rows; }
  Index cols() const { return node_->cols; }
  Index size() const { return node_->rows * node_->cols; }
  bool empty() const { return size() == 0; }
  std::string shape_string() const;

  double operator()(Index r, Index c) const { return node_->value[static_cast<std::size_t>(r * node_->cols + c)]; }
  double& operator()(Index r, Index c) { return node_->value[static_cast<std::size_t>(r * node_->cols + c)]; }
  double item() const;

  std::span<const double> values() const { return node_->value; }
  std::span<double> values() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool is_leaf() const { return node_->leaf; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> grad() { return node_->grad; }
  /// Gradient entry, treating an absent buffer as zero.
  double grad_at(Index r, Index c) const;
  void zero_grad();

  Tensor clone() const;
  bool shares_storage(const Tensor& other) const { return node_ == other.node_; }
  bool all_finite() const;

  const detail::NodePtr& node() const { return node_; }
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

 private:
  detail::NodePtr node_;
};

/// Ordered record of differentiable operations. Operations performed while a
/// tape is active on the current thread (see `activate`) and that touch at
/// least one gradient-requiring input are appended in execution order, so
/// every record's parents are either leaves or earlier records.
class Tape {
 public:
  using Backprop = std::function<void(const std::vector<double>& out_grad)>;

  class Scope {
   public:
    explicit Scope(Tape* tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  [[nodiscard]] Scope activate() { return Scope(this); }
  static Tape* active();

  void record(const detail::NodePtr& out, std::vector<detail::NodePtr> parents, Backprop backprop);

  /// Propagates d(loss)/d(.) to every gradient-requiring leaf reachable from
  /// `loss`, walking records in reverse order. Leaf gradients accumulate:
  /// calling twice without `zero_grad` doubles them.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }
  /// True when every record's non-leaf parents were recorded before it.
  bool parents_precede_children() const;

 private:
  struct Record {
    detail::NodePtr out;
    std::vector<detail::NodePtr> parents;
    Backprop backprop;
  };
  std::vector<Record> records_;
};

}  // namespace ercfuse
