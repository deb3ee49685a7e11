#include "vvc/comm_graph.hpp"

#include <deque>
#include <stdexcept>

namespace vvc::consensus {

CommGraph::CommGraph(int agents, const std::vector<std::pair<int, int>>& edges)
    : agents_(agents), base_(agents * agents, 0), up_(agents * agents, 0) {
  if (agents < 1) throw std::invalid_argument("graph needs at least one agent");
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= agents || j >= agents)
      throw std::invalid_argument("graph edge references an unknown agent");
    if (i == j) throw std::invalid_argument("self-loops are not allowed");
    base_[index(i, j)] = base_[index(j, i)] = 1;
    up_[index(i, j)] = up_[index(j, i)] = 1;
  }
}

int CommGraph::degree(int i) const {
  int d = 0;
  for (int j = 0; j < agents_; ++j) d += base_[index(i, j)];
  return d;
}

bool CommGraph::baseline_adjacent(int i, int j) const { return base_[index(i, j)] != 0; }

bool CommGraph::link_up(int i, int j) const { return up_[index(i, j)] != 0; }

void CommGraph::set_link(int i, int j, bool up) {
  if (!baseline_adjacent(i, j))
    throw std::invalid_argument("link state change on a non-existent edge");
  up_[index(i, j)] = up_[index(j, i)] = up ? 1 : 0;
}

void CommGraph::restore_all_links() { up_ = base_; }

bool CommGraph::live_equals_baseline() const { return up_ == base_; }

std::vector<int> CommGraph::live_neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < agents_; ++j)
    if (up_[index(i, j)]) out.push_back(j);
  return out;
}

std::vector<std::pair<int, int>> CommGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < agents_; ++i)
    for (int j = i + 1; j < agents_; ++j)
      if (base_[index(i, j)]) out.emplace_back(i, j);
  return out;
}

int CommGraph::component_size(int i) const {
  std::vector<char> seen(agents_, 0);
  std::deque<int> frontier{i};
  seen[i] = 1;
  int count = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop_front();
    for (int v = 0; v < agents_; ++v) {
      if (up_[index(u, v)] && !seen[v]) {
        seen[v] = 1;
        ++count;
        frontier.push_back(v);
      }
    }
  }
  return count;
}

bool CommGraph::baseline_connected() const {
  std::vector<char> seen(agents_, 0);
  std::deque<int> frontier{0};
  seen[0] = 1;
  int count = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop_front();
    for (int v = 0; v < agents_; ++v) {
      if (base_[index(u, v)] && !seen[v]) {
        seen[v] = 1;
        ++count;
        frontier.push_back(v);
      }
    }
  }
  return count == agents_;
}

}  // namespace vvc::consensus
