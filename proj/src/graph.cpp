#include "causalgen/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include "causalgen/errors.hpp"

namespace causalgen {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check_name(const std::string& name, int line_no) {
  if (name.empty())
    throw ParseError("empty node name at line " + std::to_string(line_no));
  if (name.find("->") != std::string::npos)
    throw ParseError("node name contains '->' at line " +
                     std::to_string(line_no));
}

}  // namespace

CausalGraph::CausalGraph(
    std::vector<std::string> nodes,
    std::vector<std::pair<std::string, std::string>> edges) {
  for (const auto& n : nodes) {
    if (n.empty()) throw ParseError("empty node name");
    if (index_.count(n)) throw DuplicateNode("duplicate node '" + n + "'");
    index_[n] = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
  }
  parents_.resize(nodes_.size());
  children_.resize(nodes_.size());
  for (const auto& [p, c] : edges) {
    const int pi = index_of(p);
    const int ci = index_of(c);
    if (!edges_.insert({pi, ci}).second)
      throw DuplicateEdge("duplicate edge '" + p + " -> " + c + "'");
    parents_[ci].push_back(pi);
    children_[pi].push_back(ci);
  }
  for (auto& v : parents_) std::sort(v.begin(), v.end());
  for (auto& v : children_) std::sort(v.begin(), v.end());
  if (topological_order().size() != nodes_.size())
    throw CyclicGraph("graph contains a directed cycle");
}

bool CausalGraph::has_node(const std::string& name) const {
  return index_.count(name) != 0;
}

int CausalGraph::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UnknownNode("unknown node '" + name + "'");
  return it->second;
}

bool CausalGraph::has_edge(int parent, int child) const {
  return edges_.count({parent, child}) != 0;
}

std::vector<std::pair<int, int>> CausalGraph::edges() const {
  return {edges_.begin(), edges_.end()};
}

std::vector<int> CausalGraph::topological_order() const {
  const int n = node_count();
  std::vector<int> indegree(n, 0);
  for (int i = 0; i < n; ++i)
    indegree[i] = static_cast<int>(parents_[i].size());
  // min-heap on node index keeps ties in node order
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    const int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int c : children_[u])
      if (--indegree[c] == 0) ready.push(c);
  }
  return order;  // shorter than n iff there is a cycle
}

bool CausalGraph::is_ancestor(int a, int b) const {
  if (a == b) return false;
  std::vector<char> seen(node_count(), 0);
  std::vector<int> stack = {a};
  seen[a] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int c : children_[u]) {
      if (c == b) return true;
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
    }
  }
  return false;
}

CausalGraph parse_graph(std::istream& in) {
  std::vector<std::string> nodes;
  std::set<std::string> node_set;
  std::set<std::string> bare_seen;
  std::vector<std::pair<std::string, std::string>> edges;
  std::set<std::pair<std::string, std::string>> edge_set;

  auto touch = [&](const std::string& name) {
    if (node_set.insert(name).second) nodes.push_back(name);
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto arrow = line.find("->");
    if (arrow == std::string::npos) {
      check_name(line, line_no);
      if (!bare_seen.insert(line).second)
        throw DuplicateNode("node '" + line + "' declared twice (line " +
                            std::to_string(line_no) + ")");
      touch(line);
      continue;
    }
    const std::string parent = trim(line.substr(0, arrow));
    const std::string child = trim(line.substr(arrow + 2));
    check_name(parent, line_no);
    check_name(child, line_no);
    touch(parent);
    touch(child);
    if (!edge_set.insert({parent, child}).second)
      throw DuplicateEdge("edge '" + parent + " -> " + child +
                          "' declared twice (line " + std::to_string(line_no) +
                          ")");
    edges.emplace_back(parent, child);
  }
  return CausalGraph(std::move(nodes), std::move(edges));
}

CausalGraph parse_graph(const std::string& text) {
  std::istringstream in(text);
  return parse_graph(in);
}

CausalGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open graph file '" + path + "'");
  return parse_graph(in);
}

std::string serialize(const CausalGraph& g) {
  std::ostringstream out;
  for (const auto& n : g.nodes()) out << n << "\n";
  for (const auto& [p, c] : g.edges())
    out << g.name(p) << " -> " << g.name(c) << "\n";
  return out.str();
}

void save_graph(const CausalGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write graph file '" + path + "'");
  out << serialize(g);
}

CausalGraph complete_from_ordering(const std::vector<std::string>& ordering) {
  std::vector<std::pair<std::string, std::string>> edges;
  for (std::size_t i = 0; i < ordering.size(); ++i)
    for (std::size_t j = i + 1; j < ordering.size(); ++j)
      edges.emplace_back(ordering[i], ordering[j]);
  return CausalGraph(ordering, std::move(edges));
}

CausalGraph reverse(const CausalGraph& g) {
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& [p, c] : g.edges()) edges.emplace_back(g.name(c), g.name(p));
  return CausalGraph(g.nodes(), std::move(edges));
}

CausalGraph mutilate(const CausalGraph& g,
                     const std::vector<std::string>& targets) {
  std::set<int> cut;
  for (const auto& t : targets) cut.insert(g.index_of(t));
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& [p, c] : g.edges())
    if (!cut.count(c)) edges.emplace_back(g.name(p), g.name(c));
  return CausalGraph(g.nodes(), std::move(edges));
}

}  // namespace causalgen
