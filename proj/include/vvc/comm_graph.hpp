#pragma once

#include <utility>
#include <vector>

namespace vvc::consensus {

// Undirected agent communication graph with per-link up/down state and the
// transmitted-scalar counter for communication-cost accounting.
class CommGraph {
 public:
  CommGraph() = default;
  CommGraph(int agents, const std::vector<std::pair<int, int>>& edges);

  int agent_count() const { return agents_; }
  int degree(int i) const;  // baseline degree
  bool baseline_adjacent(int i, int j) const;
  bool link_up(int i, int j) const;
  void set_link(int i, int j, bool up);
  void restore_all_links();
  bool live_equals_baseline() const;
  bool baseline_connected() const;

  std::vector<int> live_neighbors(int i) const;
  std::vector<std::pair<int, int>> edges() const;  // baseline edge list

  // Size of agent i's connected component over live links.
  int component_size(int i) const;
  bool component_spans_all(int i) const { return component_size(i) == agents_; }

  long long transmitted = 0;  // scalars sent over any link so far

 private:
  int index(int i, int j) const { return i * agents_ + j; }
  int agents_ = 0;
  std::vector<char> base_;
  std::vector<char> up_;
};

}  // namespace vvc::consensus
