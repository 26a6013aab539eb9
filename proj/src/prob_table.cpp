#include "causalgen/prob_table.hpp"

#include <cmath>
#include <set>

#include "causalgen/errors.hpp"

namespace causalgen {

ProbTable make_prob_table(std::vector<std::string> labels, Eigen::VectorXd p) {
  const int d = static_cast<int>(labels.size());
  if (d > 20)
    throw DomainError("label count must be at most 20, got " +
                      std::to_string(d));
  std::set<std::string> seen;
  for (const auto& l : labels)
    if (!seen.insert(l).second)
      throw DuplicateNode("duplicate label '" + l + "'");
  if (p.size() != (Eigen::Index{1} << d))
    throw ShapeError("probability vector needs 2^" + std::to_string(d) +
                     " entries, got " + std::to_string(p.size()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0)
      throw DomainError("probabilities must be finite and nonnegative");
    total += p[i];
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw DomainError("probabilities sum to " + std::to_string(total) +
                      ", expected 1");
  p /= total;  // keep the stored table normalized to machine precision
  return ProbTable{std::move(labels), std::move(p)};
}

namespace {

int label_index(const ProbTable& t, const std::string& label) {
  for (int i = 0; i < static_cast<int>(t.labels.size()); ++i)
    if (t.labels[i] == label) return i;
  throw UnknownNode("unknown label '" + label + "'");
}

void check_binary(const std::map<std::string, int>& m) {
  for (const auto& [k, v] : m)
    if (v != 0 && v != 1)
      throw DomainError("value for '" + k + "' must be 0 or 1, got " +
                        std::to_string(v));
}

}  // namespace

double marginal(const ProbTable& t, const std::string& label) {
  const int i = label_index(t, label);
  double total = 0.0;
  for (Eigen::Index idx = 0; idx < t.p.size(); ++idx)
    if (table_bit(idx, i)) total += t.p[idx];
  return total;
}

ProbTable marginalize(const ProbTable& t,
                      const std::vector<std::string>& keep) {
  std::vector<int> src;
  for (const auto& l : keep) src.push_back(label_index(t, l));
  const int k = static_cast<int>(keep.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(Eigen::Index{1} << k);
  for (Eigen::Index idx = 0; idx < t.p.size(); ++idx) {
    Eigen::Index to = 0;
    for (int j = 0; j < k; ++j)
      to |= Eigen::Index{table_bit(idx, src[j])} << j;
    out[to] += t.p[idx];
  }
  return make_prob_table(keep, std::move(out));
}

ProbTable interventional_joint(const ProbTable& t, const CausalGraph& g,
                               const std::map<std::string, int>& s) {
  if (t.labels != g.nodes())
    throw ShapeError("table labels must match graph nodes in order");
  check_binary(s);
  const int d = g.node_count();
  std::vector<int> forced(d, -1);
  for (const auto& [name, v] : s) forced[g.index_of(name)] = v;

  // joint of (parents, node) per node, one pass over the full table each
  std::vector<Eigen::VectorXd> fam(d);
  for (int i = 0; i < d; ++i) {
    const auto& pa = g.parents(i);
    fam[i] = Eigen::VectorXd::Zero(Eigen::Index{1} << (pa.size() + 1));
    for (Eigen::Index idx = 0; idx < t.p.size(); ++idx) {
      Eigen::Index key = 0;
      for (std::size_t j = 0; j < pa.size(); ++j)
        key |= Eigen::Index{table_bit(idx, pa[j])} << j;
      key |= Eigen::Index{table_bit(idx, i)} << pa.size();
      fam[i][key] += t.p[idx];
    }
  }

  Eigen::VectorXd out(t.p.size());
  for (Eigen::Index idx = 0; idx < t.p.size(); ++idx) {
    double prob = 1.0;
    for (int i = 0; i < d && prob > 0.0; ++i) {
      const int v = table_bit(idx, i);
      if (forced[i] >= 0) {
        if (v != forced[i]) prob = 0.0;
        continue;
      }
      const auto& pa = g.parents(i);
      Eigen::Index key = 0;
      for (std::size_t j = 0; j < pa.size(); ++j)
        key |= Eigen::Index{table_bit(idx, pa[j])} << j;
      const double mass0 = fam[i][key];
      const double mass1 = fam[i][key | (Eigen::Index{1} << pa.size())];
      const double mass = mass0 + mass1;
      prob *= mass > 0.0 ? (v ? mass1 : mass0) / mass : 0.5;
    }
    out[idx] = prob;
  }
  return make_prob_table(t.labels, std::move(out));
}

ProbTable conditional_joint(const ProbTable& t,
                            const std::map<std::string, int>& evidence) {
  check_binary(evidence);
  std::vector<std::pair<int, int>> ev;
  for (const auto& [name, v] : evidence) ev.emplace_back(label_index(t, name), v);

  Eigen::VectorXd out = t.p;
  double mass = 0.0;
  for (Eigen::Index idx = 0; idx < out.size(); ++idx) {
    bool ok = true;
    for (auto [i, v] : ev)
      if (table_bit(idx, i) != v) {
        ok = false;
        break;
      }
    if (!ok)
      out[idx] = 0.0;
    else
      mass += out[idx];
  }
  if (mass <= 0.0)
    throw ImpossibleEvidence("evidence has zero probability");
  out /= mass;
  return make_prob_table(t.labels, std::move(out));
}

}  // namespace causalgen
