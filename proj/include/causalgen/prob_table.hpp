#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "causalgen/graph.hpp"

namespace causalgen {

// Exact distribution over binary label vectors, up to 20 labels. Row index
// encodes the bit-vector in label order: bit i of the index is the value of
// labels[i].
struct ProbTable {
  std::vector<std::string> labels;
  Eigen::VectorXd p;
};

// Validates: d <= 20, unique labels, p has 2^d nonnegative entries summing to
// 1 within 1e-6 (then renormalized exactly). d = 0 is the degenerate table
// with one entry.
ProbTable make_prob_table(std::vector<std::string> labels, Eigen::VectorXd p);

inline int table_bit(Eigen::Index idx, int i) {
  return static_cast<int>((idx >> i) & 1);
}

double marginal(const ProbTable& t, const std::string& label);  // P(label = 1)

// Marginal table over `keep`, whose order fixes the result's bit layout.
ProbTable marginalize(const ProbTable& t, const std::vector<std::string>& keep);

// Truncated factorization: clamp the targets in `s` and keep every other
// node's conditional given its parents, all read off `t` by marginalization.
// Requires t.labels == g.nodes(). Conditionals at parent configurations with
// zero mass are unidentifiable from t and enter as one half.
ProbTable interventional_joint(const ProbTable& t, const CausalGraph& g,
                               const std::map<std::string, int>& s);

// Bayes conditioning: zero out rows inconsistent with the evidence and
// renormalize. Throws ImpossibleEvidence when no mass remains.
ProbTable conditional_joint(const ProbTable& t,
                            const std::map<std::string, int>& evidence);

}  // namespace causalgen
