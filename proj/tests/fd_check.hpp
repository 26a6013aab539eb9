#pragma once

// Finite-difference oracle shared by the unit and acceptance suites: rebuild
// the expression from scratch around each perturbed entry and compare the
// central difference against the tape gradient.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "causalgen/rng.hpp"
#include "causalgen/tape.hpp"

namespace fdcheck {

using BuildFn = std::function<causalgen::Value(
    causalgen::Tape&, const std::vector<causalgen::Value>&)>;

inline double eval_scalar(const BuildFn& f,
                          const std::vector<Eigen::MatrixXd>& inputs) {
  causalgen::Tape tape;
  std::vector<causalgen::Value> vars;
  for (const auto& m : inputs) vars.push_back(tape.var(m));
  return f(tape, vars).scalar();
}

// max over all input entries of |analytic - central difference| scaled by
// max(1, |analytic|, |fd|)
inline double max_rel_err(const BuildFn& f,
                          std::vector<Eigen::MatrixXd> inputs,
                          double h = 1e-5) {
  std::vector<Eigen::MatrixXd> analytic;
  {
    causalgen::Tape tape;
    std::vector<causalgen::Value> vars;
    for (const auto& m : inputs) vars.push_back(tape.var(m));
    analytic = tape.gradient(f(tape, vars), vars);
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index j = 0; j < inputs[k].cols(); ++j) {
      for (Eigen::Index i = 0; i < inputs[k].rows(); ++i) {
        const double keep = inputs[k](i, j);
        inputs[k](i, j) = keep + h;
        const double up = eval_scalar(f, inputs);
        inputs[k](i, j) = keep - h;
        const double down = eval_scalar(f, inputs);
        inputs[k](i, j) = keep;
        const double fd = (up - down) / (2.0 * h);
        const double ad = analytic[k](i, j);
        const double scale = std::max({1.0, std::abs(ad), std::abs(fd)});
        worst = std::max(worst, std::abs(ad - fd) / scale);
      }
    }
  }
  return worst;
}

inline Eigen::MatrixXd random_matrix(causalgen::RngStream& r, int rows,
                                     int cols, double lo, double hi) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = r.uniform(lo, hi);
  return m;
}

}  // namespace fdcheck
