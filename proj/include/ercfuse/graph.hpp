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

#include <string>
#include <vector>

#include "ercfuse/tensor.hpp"

namespace ercfuse {

/// Directed edge: `src` is an attended neighbour of `dst`.
struct Edge {
  Index src = 0;
  Index dst = 0;
  bool operator==(const Edge&) const = default;
};

/// Context-window conversation graph. Node i receives an edge from every j
/// with i - past <= j <= i + future, j != i, clamped to [0, m). Edges are
/// stored grouped by destination, sources ascending within a group.
class ConvGraph {
 public:
  ConvGraph(Index num_nodes, Index past, Index future);

  Index num_nodes() const { return num_nodes_; }
  Index past() const { return past_; }
  Index future() const { return future_; }
  const std::vector<Edge>& edges() const { return edges_; }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }

  /// Sources of the edges entering `node`, ascending.
  std::vector<Index> neighbors_of(Index node) const;
  Index in_degree(Index node) const;

  const std::vector<Index>& sources() const { return sources_; }
  const std::vector<Index>& destinations() const { return destinations_; }

  /// {"m","past","future","edges":[[src,dst],...],"in_degree":[...],"in_degree_histogram":{deg:count}}
  std::string to_json() const;

 private:
  Index num_nodes_;
  Index past_;
  Index future_;
  std::vector<Edge> edges_;
  std::vector<Index> sources_;
  std::vector<Index> destinations_;
  std::vector<Index> offsets_;  // edges of node i live in [offsets_[i], offsets_[i+1])
};

inline ConvGraph build_graph(Index m, Index past, Index future) { return ConvGraph(m, past, future); }

}  // namespace ercfuse
