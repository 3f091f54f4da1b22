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

#include "ercfuse/graph.hpp"

#include <algorithm>
#include <json.hpp>
#include <map>

#include "ercfuse/errors.hpp"

namespace ercfuse {

ConvGraph::ConvGraph(Index num_nodes, Index past, Index future)
    : num_nodes_(num_nodes), past_(past), future_(future) {
  if (num_nodes < 1) fail(ErrorKind::kContract, "graph needs at least one node");
  if (past < 0 || future < 0) fail(ErrorKind::kContract, "window sizes must be non-negative");
  offsets_.reserve(static_cast<std::size_t>(num_nodes + 1));
  for (Index i = 0; i < num_nodes; ++i) {
    offsets_.push_back(static_cast<Index>(edges_.size()));
    const Index lo = std::max<Index>(0, i - past);
    const Index hi = std::min<Index>(num_nodes - 1, i + future);
    for (Index j = lo; j <= hi; ++j) {
      if (j == i) continue;
      edges_.push_back({j, i});
      sources_.push_back(j);
      destinations_.push_back(i);
    }
  }
  offsets_.push_back(static_cast<Index>(edges_.size()));
}

std::vector<Index> ConvGraph::neighbors_of(Index node) const {
  if (node < 0 || node >= num_nodes_) {
    fail(ErrorKind::kContract, "node " + std::to_string(node) + " outside graph of " + std::to_string(num_nodes_) + " nodes");
  }
  const auto first = sources_.begin() + offsets_[static_cast<std::size_t>(node)];
  const auto last = sources_.begin() + offsets_[static_cast<std::size_t>(node) + 1];
  return {first, last};
}

Index ConvGraph::in_degree(Index node) const {
  if (node < 0 || node >= num_nodes_) fail(ErrorKind::kContract, "node index out of range");
  return offsets_[static_cast<std::size_t>(node) + 1] - offsets_[static_cast<std::size_t>(node)];
}

std::string ConvGraph::to_json() const {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : edges_) edges.push_back({e.src, e.dst});
  std::vector<Index> degrees;
  std::map<Index, Index> histogram;
  for (Index i = 0; i < num_nodes_; ++i) {
    degrees.push_back(in_degree(i));
    ++histogram[degrees.back()];
  }
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [deg, count] : histogram) hist[std::to_string(deg)] = count;
  nlohmann::json j = {{"m", num_nodes_}, {"past", past_},     {"future", future_}, {"num_edges", edges_.size()},
                      {"edges", edges}, {"in_degree", degrees}, {"in_degree_histogram", hist}};
  return j.dump();
}

}  // namespace ercfuse
