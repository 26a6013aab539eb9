#include "causalgen/scm.hpp"

#include <cmath>

#include "causalgen/errors.hpp"

namespace causalgen {

std::vector<std::vector<int>> cubic_monomials(int vars) {
  if (vars < 1) throw DomainError("cubic_monomials needs at least 1 variable");
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  auto rec = [&](auto&& self, int remaining) -> void {
    if (static_cast<int>(cur.size()) == vars) {
      out.push_back(cur);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      cur.push_back(e);
      self(self, remaining - e);
      cur.pop_back();
    }
  };
  rec(rec, 3);
  return out;
}

Eigen::Index cubic_coeff_count(int vars) {
  // C(vars + 3, 3)
  const Eigen::Index v = vars;
  return (v + 1) * (v + 2) * (v + 3) / 6;
}

void validate_scm(const Scm& scm) {
  const int d = scm.graph.node_count();
  if (static_cast<int>(scm.mechanisms.size()) != d)
    throw ShapeError("expected " + std::to_string(d) + " mechanisms, got " +
                     std::to_string(scm.mechanisms.size()));
  if (static_cast<int>(scm.exogenous.size()) != d)
    throw ShapeError("expected " + std::to_string(d) + " exogenous entries");
  for (int i = 0; i < d; ++i) {
    const auto n_parents = scm.graph.parents(i).size();
    const auto& mech = scm.mechanisms[i];
    if (const auto* t = std::get_if<DiscreteTable>(&mech)) {
      if (t->p1.size() != (Eigen::Index{1} << n_parents))
        throw ShapeError("node '" + scm.graph.name(i) + "' table needs 2^" +
                         std::to_string(n_parents) + " entries, got " +
                         std::to_string(t->p1.size()));
      for (Eigen::Index k = 0; k < t->p1.size(); ++k)
        if (!(t->p1[k] >= 0.0 && t->p1[k] <= 1.0))
          throw DomainError("node '" + scm.graph.name(i) +
                            "' table entry outside [0,1]");
      if (scm.exogenous[i].dist != ExoDist::Uniform01)
        throw UnsupportedMechanism(
            "discrete table on '" + scm.graph.name(i) +
            "' requires a Uniform[0,1] exogenous variable");
    } else if (const auto* c = std::get_if<CubicPoly>(&mech)) {
      const auto want = cubic_coeff_count(static_cast<int>(n_parents) + 1);
      if (c->coeffs.size() != want)
        throw ShapeError("node '" + scm.graph.name(i) + "' needs " +
                         std::to_string(want) + " cubic coefficients, got " +
                         std::to_string(c->coeffs.size()));
    }
    if (scm.exogenous[i].dist == ExoDist::Bernoulli &&
        !(scm.exogenous[i].p >= 0.0 && scm.exogenous[i].p <= 1.0))
      throw DomainError("Bernoulli parameter outside [0,1]");
  }
}

namespace {

double draw_exo(const Exogenous& exo, RngStream& stream) {
  switch (exo.dist) {
    case ExoDist::Uniform01:
      return stream.uniform();
    case ExoDist::Bernoulli:
      return stream.uniform() < exo.p ? 1.0 : 0.0;
  }
  throw DomainError("unreachable exogenous kind");
}

double eval_mechanism(const Scm& scm, int node,
                      const Eigen::MatrixXd& values, int row, double e) {
  const auto& pa = scm.graph.parents(node);
  const auto& mech = scm.mechanisms[node];
  if (const auto* t = std::get_if<DiscreteTable>(&mech)) {
    Eigen::Index combo = 0;
    for (std::size_t j = 0; j < pa.size(); ++j) {
      const double v = values(row, pa[j]);
      if (v != 0.0 && v != 1.0)
        throw DomainError("discrete node '" + scm.graph.name(node) +
                          "' has non-binary parent value");
      combo |= Eigen::Index{v == 1.0} << j;
    }
    const double p1 = t->p1[combo];
    const bool one = t->invert_exo ? (e > 1.0 - p1) : (e < p1);
    return one ? 1.0 : 0.0;
  }
  if (const auto* c = std::get_if<CubicPoly>(&mech)) {
    const int vars = static_cast<int>(pa.size()) + 1;
    static thread_local std::map<int, std::vector<std::vector<int>>> cache;
    auto it = cache.find(vars);
    if (it == cache.end())
      it = cache.emplace(vars, cubic_monomials(vars)).first;
    const auto& monos = it->second;
    double acc = 0.0;
    for (std::size_t m = 0; m < monos.size(); ++m) {
      double term = c->coeffs[static_cast<Eigen::Index>(m)];
      for (int j = 0; j < vars; ++j) {
        const double base = j < static_cast<int>(pa.size())
                                ? values(row, pa[j])
                                : e;
        for (int k = 0; k < monos[m][j]; ++k) term *= base;
      }
      acc += term;
    }
    return c->squash ? std::tanh(acc) : acc;
  }
  return std::get<ConstantMech>(mech).value;
}

Eigen::MatrixXd sample_impl(const Scm& scm,
                            const std::map<std::string, double>& s, int n,
                            RngStream& stream) {
  validate_scm(scm);
  if (n < 0) throw DomainError("sample count must be nonnegative");
  const int d = scm.graph.node_count();
  std::vector<double> forced(d, std::nan(""));
  for (const auto& [name, v] : s) {
    if (!std::isfinite(v))
      throw DomainError("intervention value for '" + name + "' is not finite");
    forced[scm.graph.index_of(name)] = v;
  }

  Eigen::MatrixXd values(n, d);
  for (int node : scm.graph.topological_order()) {
    if (!std::isnan(forced[node])) {
      values.col(node).setConstant(forced[node]);
      // burn the node's draws so do() changes no other node's noise
      for (int row = 0; row < n; ++row) draw_exo(scm.exogenous[node], stream);
      continue;
    }
    for (int row = 0; row < n; ++row) {
      const double e = draw_exo(scm.exogenous[node], stream);
      values(row, node) = eval_mechanism(scm, node, values, row, e);
    }
  }
  return values;
}

}  // namespace

Eigen::MatrixXd sample(const Scm& scm, int n, std::uint64_t seed) {
  RngStream stream(seed, "scm/sample");
  return sample_impl(scm, {}, n, stream);
}

Eigen::MatrixXd sample(const Scm& scm, int n, RngStream& stream) {
  return sample_impl(scm, {}, n, stream);
}

Eigen::MatrixXd sample_do(const Scm& scm,
                          const std::map<std::string, double>& s, int n,
                          std::uint64_t seed) {
  RngStream stream(seed, "scm/sample");
  return sample_impl(scm, s, n, stream);
}

Eigen::MatrixXd sample_do(const Scm& scm,
                          const std::map<std::string, double>& s, int n,
                          RngStream& stream) {
  return sample_impl(scm, s, n, stream);
}

ProbTable exact_joint(const Scm& scm) {
  validate_scm(scm);
  const int d = scm.graph.node_count();
  if (d > 20) throw DomainError("exact_joint supports at most 20 nodes");
  Eigen::VectorXd p(Eigen::Index{1} << d);
  for (Eigen::Index idx = 0; idx < p.size(); ++idx) {
    double prob = 1.0;
    for (int i = 0; i < d && prob > 0.0; ++i) {
      const int v = table_bit(idx, i);
      const auto& mech = scm.mechanisms[i];
      if (const auto* t = std::get_if<DiscreteTable>(&mech)) {
        Eigen::Index combo = 0;
        const auto& pa = scm.graph.parents(i);
        for (std::size_t j = 0; j < pa.size(); ++j)
          combo |= Eigen::Index{table_bit(idx, pa[j])} << j;
        const double p1 = t->p1[combo];
        prob *= v ? p1 : 1.0 - p1;
      } else if (const auto* c = std::get_if<ConstantMech>(&mech)) {
        if (c->value != 0.0 && c->value != 1.0)
          throw DomainError("constant node '" + scm.graph.name(i) +
                            "' is not binary");
        prob *= (c->value == 1.0) == (v == 1) ? 1.0 : 0.0;
      } else {
        throw UnsupportedMechanism(
            "exact_joint needs discrete mechanisms, node '" +
            scm.graph.name(i) + "' is cubic");
      }
    }
    p[idx] = prob;
  }
  return make_prob_table(scm.graph.nodes(), std::move(p));
}

Scm make_cubic_scm(const CausalGraph& g, std::uint64_t seed, bool squash) {
  RngStream stream(seed, "scm/cubic-coeffs");
  Scm scm{g, {}, {}};
  for (int i = 0; i < g.node_count(); ++i) {
    const auto count =
        cubic_coeff_count(static_cast<int>(g.parents(i).size()) + 1);
    Eigen::VectorXd coeffs(count);
    for (Eigen::Index k = 0; k < count; ++k)
      coeffs[k] = stream.uniform(-1.0, 1.0);
    scm.mechanisms.push_back(CubicPoly{std::move(coeffs), squash});
    scm.exogenous.push_back(Exogenous{});
  }
  return scm;
}

}  // namespace causalgen
