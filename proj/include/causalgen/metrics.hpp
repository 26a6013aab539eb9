#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "causalgen/prob_table.hpp"

namespace causalgen {

// Named scalar metrics logged against a strictly increasing step counter.
struct MetricTrace {
  std::vector<std::string> columns;
  std::vector<long> steps;
  std::vector<Eigen::VectorXd> rows;

  void append(long step, const Eigen::VectorXd& values);
  Eigen::VectorXd column(const std::string& name) const;
  double last(const std::string& name) const;

  void write_csv(std::ostream& out) const;
  void save_csv(const std::string& path) const;
  static MetricTrace load_csv(const std::string& path);
};

// Frequency table of binary label rows. Entries must be exactly 0 or 1.
ProbTable empirical_joint(const Eigen::MatrixXd& samples,
                          const std::vector<std::string>& labels);

// 0.5 * sum |p - q|, over matching label orders / equal-length raw vectors.
double tvd(const ProbTable& p, const ProbTable& q);
double tvd(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// Equal-width product binning for continuous samples. The bin edges come from
// one reference dataset (per-coordinate min/max) so both sides of a
// comparison share them; out-of-range values count toward the edge bins.
struct HistogramSpec {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  int bins = 10;
};

HistogramSpec histogram_spec(const Eigen::MatrixXd& reference, int bins = 10);
Eigen::VectorXd histogram_density(const Eigen::MatrixXd& samples,
                                  const HistogramSpec& spec);
double histogram_tvd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const HistogramSpec& spec);

// Draws a requested number of label rows.
using LabelSampler = std::function<Eigen::MatrixXd(int)>;

struct RejectionResult {
  Eigen::MatrixXd samples;
  long draws = 0;
  long accepted = 0;
  double acceptance_rate() const {
    return draws == 0 ? 0.0 : static_cast<double>(accepted) / draws;
  }
};

// Rejection sampling: keep rows whose `evidence` columns carry the required
// values until n are accepted. Gives up with ImpossibleEvidence when the
// acceptance estimate over the first 1e4 draws falls below 1e-4, or when
// max_draws is exhausted.
RejectionResult rejection_condition(
    const LabelSampler& sampler,
    const std::vector<std::pair<int, double>>& evidence, int n,
    long max_draws = 4'000'000);

// P(L=1) per label, in table order.
std::vector<double> marginal_report(const ProbTable& t);

// 2x2 joint of two labels; entry (i, j) is P(a = i, b = j).
Eigen::Matrix2d pairwise_report(const ProbTable& t, const std::string& a,
                                const std::string& b);

// Aligned text table: one row per name, one numeric column per (header,
// values) pair.
std::string format_report(
    const std::vector<std::string>& row_names,
    const std::vector<std::pair<std::string, std::vector<double>>>& columns);

}  // namespace causalgen
