#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "causalgen/graph.hpp"
#include "causalgen/prob_table.hpp"
#include "causalgen/rng.hpp"

namespace causalgen {

// P(node = 1 | parent combination). Combination index bit j is the value of
// the j-th parent in graph parent order. Sampling realizes the conditional
// as e < p1 on a Uniform[0,1] exogenous draw, or e > 1 - p1 when invert_exo
// is set; the two give identical conditionals through different structural
// functions.
struct DiscreteTable {
  Eigen::VectorXd p1;
  bool invert_exo = false;
};

// Polynomial of total degree <= 3 in (parent values..., exogenous draw),
// coefficients in cubic_monomials order. With squash the node value is
// tanh of the polynomial.
struct CubicPoly {
  Eigen::VectorXd coeffs;
  bool squash = true;
};

struct ConstantMech {
  double value = 0.0;
};

using Mechanism = std::variant<DiscreteTable, CubicPoly, ConstantMech>;

enum class ExoDist { Uniform01, Bernoulli };

struct Exogenous {
  ExoDist dist = ExoDist::Uniform01;
  double p = 0.5;  // Bernoulli only
};

struct Scm {
  CausalGraph graph;
  std::vector<Mechanism> mechanisms;  // one per node, node order
  std::vector<Exogenous> exogenous;   // one per node, node order
};

// Exponent vectors of all monomials of total degree <= 3 over `vars`
// variables, first variable varying slowest. C(vars + 3, 3) of them.
std::vector<std::vector<int>> cubic_monomials(int vars);
Eigen::Index cubic_coeff_count(int vars);

// Shape and domain checks; throws on the first violation.
void validate_scm(const Scm& scm);

// Ancestral sampling in topological order, one row per draw, columns in node
// order. Same seed, same matrix.
Eigen::MatrixXd sample(const Scm& scm, int n, std::uint64_t seed);
Eigen::MatrixXd sample(const Scm& scm, int n, RngStream& stream);

// Sampling under do(s): intervened nodes are clamped before any child reads
// them. An empty s reproduces sample() draw for draw.
Eigen::MatrixXd sample_do(const Scm& scm, const std::map<std::string, double>& s,
                          int n, std::uint64_t seed);
Eigen::MatrixXd sample_do(const Scm& scm, const std::map<std::string, double>& s,
                          int n, RngStream& stream);

// Brute-force joint over all 2^d assignments; discrete mechanisms only.
ProbTable exact_joint(const Scm& scm);

// Every node a cubic polynomial in its parents and one exogenous draw,
// coefficients Uniform[-1,1].
Scm make_cubic_scm(const CausalGraph& g, std::uint64_t seed, bool squash = true);

}  // namespace causalgen
