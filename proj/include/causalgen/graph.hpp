#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace causalgen {

// Directed acyclic graph over named nodes. Node identity is the exact name
// string; node order is first-mention order and every operation (serialize,
// reverse, mutilate) preserves it. Acyclicity is checked at construction.
class CausalGraph {
 public:
  CausalGraph() = default;
  CausalGraph(std::vector<std::string> nodes,
              std::vector<std::pair<std::string, std::string>> edges);

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::string& name(int i) const { return nodes_.at(i); }

  bool has_node(const std::string& name) const;
  int index_of(const std::string& name) const;  // throws UnknownNode
  bool has_edge(int parent, int child) const;

  // parent/child index lists, ascending by node order
  const std::vector<int>& parents(int i) const { return parents_.at(i); }
  const std::vector<int>& children(int i) const { return children_.at(i); }

  // edges sorted by (parent index, child index)
  std::vector<std::pair<int, int>> edges() const;

  // Kahn's algorithm; ties broken by node order
  std::vector<int> topological_order() const;

  bool is_ancestor(int a, int b) const;  // strict: a != b required for true

 private:
  std::vector<std::string> nodes_;
  std::map<std::string, int> index_;
  std::set<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
};

// Text format, one statement per line:
//   A -> B     edge (registers A then B on first mention)
//   C          bare name, isolated node
//   # ...      comment, also allowed after a statement
// Names are trimmed; internal spaces are allowed, "->" is not.
CausalGraph parse_graph(std::istream& in);
CausalGraph parse_graph(const std::string& text);
CausalGraph load_graph(const std::string& path);

// Nodes first (bare lines, node order), then edges in (parent, child)
// node order. parse(serialize(g)) reproduces g exactly.
std::string serialize(const CausalGraph& g);
void save_graph(const CausalGraph& g, const std::string& path);

// Complete DAG: every earlier name points at every later one.
CausalGraph complete_from_ordering(const std::vector<std::string>& ordering);

// Same nodes, every edge flipped.
CausalGraph reverse(const CausalGraph& g);

// Drop all edges into each target node, keeping everything else.
CausalGraph mutilate(const CausalGraph& g,
                     const std::vector<std::string>& targets);

}  // namespace causalgen
