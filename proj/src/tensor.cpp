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

#include "ercfuse/tensor.hpp"

#include <cmath>
#include <sstream>

#include "ercfuse/errors.hpp"

namespace ercfuse {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) {}

Tensor::Tensor(Index rows, Index cols, double fill) : node_(std::make_shared<detail::Node>()) {
  if (rows < 0 || cols < 0) fail(ErrorKind::kDimension, "negative tensor shape");
  node_->rows = rows;
  node_->cols = cols;
  node_->value.assign(static_cast<std::size_t>(rows * cols), fill);
}

Tensor::Tensor(Index rows, Index cols, std::vector<double> values) : node_(std::make_shared<detail::Node>()) {
  if (rows < 0 || cols < 0 || static_cast<Index>(values.size()) != rows * cols) {
    std::ostringstream os;
    os << "data length " << values.size() << " does not match shape (" << rows << "x" << cols << ")";
    fail(ErrorKind::kDimension, os.str());
  }
  node_->rows = rows;
  node_->cols = cols;
  node_->value = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(1, 1, value); }

Tensor Tensor::row_vector(std::vector<double> values) {
  const auto n = static_cast<Index>(values.size());
  return Tensor(1, n, std::move(values));
}

Tensor Tensor::parameter(Index rows, Index cols) {
  Tensor t(rows, cols, 0.0);
  t.node_->requires_grad = true;
  t.node_->grad.assign(t.node_->value.size(), 0.0);
  return t;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << "(" << rows() << "x" << cols() << ")";
  return os.str();
}

double Tensor::item() const {
  if (size() != 1) fail(ErrorKind::kContract, "item() on non-scalar tensor " + shape_string());
  return node_->value[0];
}

void Tensor::set_requires_grad(bool on) {
  if (!node_->leaf) fail(ErrorKind::kContract, "requires_grad can only be set on leaf tensors");
  node_->requires_grad = on;
}

double Tensor::grad_at(Index r, Index c) const {
  if (node_->grad.empty()) return 0.0;
  return node_->grad[static_cast<std::size_t>(r * cols() + c)];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return Tensor(rows(), cols(), node_->value); }

bool Tensor::all_finite() const {
  for (double v : node_->value)
    if (!std::isfinite(v)) return false;
  return true;
}

Tape::Scope::Scope(Tape* tape) : previous_(g_active_tape) { g_active_tape = tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const detail::NodePtr& out, std::vector<detail::NodePtr> parents, Backprop backprop) {
  out->leaf = false;
  out->requires_grad = true;
  out->tape = this;
  out->tape_position = records_.size();
  records_.push_back(Record{out, std::move(parents), std::move(backprop)});
}

void Tape::backward(const Tensor& loss) {
  const auto& root = loss.node();
  if (loss.size() != 1) fail(ErrorKind::kContract, "backward() needs a scalar loss, got " + loss.shape_string());
  if (root->leaf || root->tape != this || root->tape_position >= records_.size() ||
      records_[root->tape_position].out != root) {
    fail(ErrorKind::kContract, "backward() loss was not recorded on this tape");
  }
  for (auto& rec : records_) rec.out->grad.assign(rec.out->value.size(), 0.0);
  root->grad[0] = 1.0;
  for (std::size_t i = root->tape_position + 1; i-- > 0;) {
    auto& rec = records_[i];
    rec.backprop(rec.out->grad);
  }
}

bool Tape::parents_precede_children() const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    for (const auto& p : records_[i].parents) {
      if (p->leaf) continue;
      if (p->tape != this || p->tape_position >= i) return false;
    }
  }
  return true;
}

}  // namespace ercfuse
