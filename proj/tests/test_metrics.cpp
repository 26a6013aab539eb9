#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "causalgen/errors.hpp"
#include "causalgen/metrics.hpp"
#include "causalgen/prob_table.hpp"
#include "causalgen/rng.hpp"
#include "causalgen/scm.hpp"

using namespace causalgen;
namespace fs = std::filesystem;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Scm chain_scm() {
  // A -> B with P(A=1)=0.3, P(B=1|A=0)=0.2, P(B=1|A=1)=0.9
  Scm scm{parse_graph("A -> B"), {}, {}};
  scm.mechanisms = {DiscreteTable{vec({0.3})}, DiscreteTable{vec({0.2, 0.9})}};
  scm.exogenous = {Exogenous{}, Exogenous{}};
  return scm;
}

ProbTable random_table(RngStream& r, const std::vector<std::string>& labels) {
  Eigen::VectorXd p(Eigen::Index{1} << labels.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = r.uniform(0.01, 1.0);
  return make_prob_table(labels, p / p.sum());
}

}  // namespace

TEST_CASE("tvd on hand-built tables") {
  auto p = make_prob_table({"A"}, vec({0.5, 0.5}));
  auto q = make_prob_table({"A"}, vec({0.9, 0.1}));
  CHECK(tvd(p, p) == 0.0);
  CHECK(tvd(p, q) == doctest::Approx(0.4).epsilon(1e-12));

  auto point0 = make_prob_table({"A"}, vec({1.0, 0.0}));
  auto point1 = make_prob_table({"A"}, vec({0.0, 1.0}));
  CHECK(tvd(point0, point1) == doctest::Approx(1.0).epsilon(1e-12));

  auto other = make_prob_table({"B"}, vec({0.5, 0.5}));
  CHECK_THROWS_AS(tvd(p, other), SchemaError);

  CHECK(tvd(vec({0.5, 0.5}), vec({0.9, 0.1})) == doctest::Approx(0.4));
  CHECK_THROWS_AS(tvd(vec({0.5, 0.5}), vec({1.0})), ShapeError);
}

TEST_CASE("tvd behaves like a metric on random tables") {
  RngStream r(41, "tvd-metric");
  const std::vector<std::string> labels{"A", "B", "C"};
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_table(r, labels);
    auto q = random_table(r, labels);
    auto s = random_table(r, labels);
    CHECK(tvd(p, q) == doctest::Approx(tvd(q, p)).epsilon(1e-12));
    CHECK(tvd(p, p) < 1e-12);
    CHECK(tvd(p, s) <= tvd(p, q) + tvd(q, s) + 1e-12);
    CHECK(tvd(p, q) >= 0.0);
    CHECK(tvd(p, q) <= 1.0);
  }
}

TEST_CASE("empirical joint counts binary rows") {
  Eigen::MatrixXd rows(4, 2);
  rows << 1, 0, 1, 0, 1, 0, 1, 0;
  auto t = empirical_joint(rows, {"A", "B"});
  CHECK(t.p[1] == 1.0);  // point mass at (A=1, B=0)
  CHECK(t.p.sum() == doctest::Approx(1.0));

  auto degenerate = empirical_joint(Eigen::MatrixXd(0, 0), {});
  CHECK(degenerate.p.size() == 1);
  CHECK(degenerate.p[0] == 1.0);

  Eigen::MatrixXd bad(1, 2);
  bad << 1, 0.5;
  CHECK_THROWS_AS(empirical_joint(bad, {"A", "B"}), DomainError);
  CHECK_THROWS_AS(empirical_joint(rows, {"A"}), ShapeError);
  CHECK_THROWS_AS(empirical_joint(Eigen::MatrixXd(0, 1), {"A"}), DomainError);
}

TEST_CASE("a million samples land within 0.01 tvd of the exact joint") {
  auto scm = chain_scm();
  auto exact = exact_joint(scm);
  auto samples = sample(scm, 1'000'000, 90210);
  auto emp = empirical_joint(samples, scm.graph.nodes());
  CHECK(tvd(emp, exact) < 0.01);

  auto exact_do = interventional_joint(exact, scm.graph, {{"B", 1}});
  auto samples_do = sample_do(scm, {{"B", 1.0}}, 1'000'000, 90211);
  auto emp_do = empirical_joint(samples_do, scm.graph.nodes());
  CHECK(tvd(emp_do, exact_do) < 0.01);
}

TEST_CASE("rejection with empty evidence is passthrough sampling") {
  auto scm = chain_scm();
  RngStream stream(7, "rej-pass");
  LabelSampler sampler = [&](int n) { return sample(scm, n, stream); };
  auto res = rejection_condition(sampler, {}, 500);
  CHECK(res.samples.rows() == 500);
  CHECK(res.samples.cols() == 2);
  CHECK(res.draws == 500);
  CHECK(res.accepted == 500);
  CHECK(res.acceptance_rate() == 1.0);
}

TEST_CASE("rejection conditioning matches the bayes oracle on the chain") {
  auto scm = chain_scm();
  auto exact = exact_joint(scm);
  auto cond = conditional_joint(exact, {{"B", 1}});
  const double oracle_p_a1 = marginal(cond, "A");  // 27/41
  CHECK(oracle_p_a1 == doctest::Approx(27.0 / 41.0).epsilon(1e-12));

  RngStream stream(8, "rej-cond");
  LabelSampler sampler = [&](int n) { return sample(scm, n, stream); };
  auto res = rejection_condition(sampler, {{1, 1.0}}, 5000);
  for (Eigen::Index r = 0; r < res.samples.rows(); ++r)
    REQUIRE(res.samples(r, 1) == 1.0);
  const double p_a1 = res.samples.col(0).mean();
  CHECK(std::abs(p_a1 - oracle_p_a1) < 0.05);

  // acceptance estimate within two standard errors of P(B=1) = 0.41
  const double p_evidence = marginal(exact, "B");
  const double se = std::sqrt(p_evidence * (1 - p_evidence) /
                              static_cast<double>(res.draws));
  CHECK(std::abs(res.acceptance_rate() - p_evidence) < 2 * se);
}

TEST_CASE("impossible evidence trips the acceptance floor") {
  LabelSampler zeros = [](int n) { return Eigen::MatrixXd::Zero(n, 2); };
  CHECK_THROWS_WITH_AS(rejection_condition(zeros, {{0, 1.0}}, 10),
                       doctest::Contains("acceptance"), ImpossibleEvidence);

  // feasible evidence but a draw budget too small to fill the request
  LabelSampler ones = [](int n) { return Eigen::MatrixXd::Ones(n, 1); };
  CHECK_THROWS_AS(rejection_condition(ones, {{0, 1.0}}, 500, 100),
                  ImpossibleEvidence);

  CHECK_THROWS_AS(rejection_condition(ones, {{3, 1.0}}, 1), ShapeError);
  CHECK_THROWS_AS(rejection_condition(ones, {}, 0), DomainError);
}

TEST_CASE("marginal report reads per-label P(=1)") {
  auto chain = make_prob_table({"A", "B"}, vec({0.56, 0.03, 0.14, 0.27}));
  auto m = marginal_report(chain);
  REQUIRE(m.size() == 2);
  CHECK(m[0] == doctest::Approx(0.30).epsilon(1e-12));
  CHECK(m[1] == doctest::Approx(0.41).epsilon(1e-12));

  auto uniform = make_prob_table({"A", "B"}, vec({0.25, 0.25, 0.25, 0.25}));
  for (double v : marginal_report(uniform)) CHECK(v == doctest::Approx(0.5));

  auto ones = make_prob_table({"A", "B"}, vec({0, 0, 0, 1.0}));
  for (double v : marginal_report(ones)) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("pairwise report marginalizes everything else away") {
  RngStream r(42, "pairwise");
  auto t = random_table(r, {"A", "B", "C", "D"});
  auto pair = pairwise_report(t, "B", "D");
  double total = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) total += pair(i, j);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pair(1, 0) + pair(1, 1) == doctest::Approx(marginal(t, "B")));
  CHECK(pair(0, 1) + pair(1, 1) == doctest::Approx(marginal(t, "D")));

  // commutes with marginalizing first
  auto reduced = marginalize(t, {"D", "B", "A"});
  auto pair2 = pairwise_report(reduced, "B", "D");
  CHECK((pair - pair2).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(pairwise_report(t, "B", "missing"), UnknownNode);
}

TEST_CASE("independent labels give an outer-product pairwise table") {
  const double pa = 0.3, pb = 0.7;
  Eigen::VectorXd p(4);
  p << (1 - pa) * (1 - pb), pa * (1 - pb), (1 - pa) * pb, pa * pb;
  auto t = make_prob_table({"A", "B"}, p);
  auto pair = pairwise_report(t, "A", "B");
  CHECK(std::abs(pair(0, 0) - (1 - pa) * (1 - pb)) < 1e-9);
  CHECK(std::abs(pair(1, 0) - pa * (1 - pb)) < 1e-9);
  CHECK(std::abs(pair(0, 1) - (1 - pa) * pb) < 1e-9);
  CHECK(std::abs(pair(1, 1) - pa * pb) < 1e-9);
}

TEST_CASE("histogram tvd on hand-binned data") {
  // reference spans [0, 10] in one dimension, so bins are width 1
  Eigen::MatrixXd ref(2, 1);
  ref << 0.0, 10.0;
  auto spec = histogram_spec(ref, 10);
  CHECK(spec.lo[0] == 0.0);
  CHECK(spec.hi[0] == 10.0);

  Eigen::MatrixXd a(4, 1), b(4, 1);
  a << 0.5, 1.5, 1.7, 9.2;   // bins 0, 1, 1, 9
  b << 0.2, 3.5, -5.0, 25.0; // bins 0, 3, 0 (clamped), 9 (clamped)
  auto da = histogram_density(a, spec);
  CHECK(da[0] == doctest::Approx(0.25));
  CHECK(da[1] == doctest::Approx(0.5));
  CHECK(da[9] == doctest::Approx(0.25));
  // |0.25-0.5| + |0.5-0| + |0-0.25| + |0.25-0.25| = 1.0, halved
  CHECK(histogram_tvd(a, b, spec) == doctest::Approx(0.5));
  CHECK(histogram_tvd(a, a, spec) == 0.0);

  // boundary value 10.0 lands in the last bin, not one past it
  Eigen::MatrixXd edge(1, 1);
  edge << 10.0;
  CHECK(histogram_density(edge, spec)[9] == doctest::Approx(1.0));
}

TEST_CASE("joint histograms index cells coordinate-major") {
  Eigen::MatrixXd ref(2, 2);
  ref << 0, 0, 1, 1;
  auto spec = histogram_spec(ref, 2);
  Eigen::MatrixXd pts(1, 2);
  pts << 0.9, 0.1;  // bin 1 in x, bin 0 in y -> cell 1
  auto d = histogram_density(pts, spec);
  REQUIRE(d.size() == 4);
  CHECK(d[1] == doctest::Approx(1.0));

  CHECK_THROWS_AS(histogram_density(Eigen::MatrixXd::Zero(1, 3), spec),
                  ShapeError);
  CHECK_THROWS_AS(histogram_spec(Eigen::MatrixXd(0, 2), 10), DomainError);
  CHECK_THROWS_AS(histogram_spec(ref, 0), DomainError);
}

TEST_CASE("histogram agrees with exact tvd on binary data") {
  // on 0/1 columns with a [0,1] reference range, 2-bin histograms reproduce
  // the discrete joint, so histogram tvd equals table tvd
  auto scm = chain_scm();
  auto x = sample(scm, 20'000, 5);
  auto y = sample_do(scm, {{"A", 1.0}}, 20'000, 6);
  Eigen::MatrixXd ref(2, 2);
  ref << 0, 0, 1, 1;
  auto spec = histogram_spec(ref, 2);
  const double h = histogram_tvd(x, y, spec);
  const double t = tvd(empirical_joint(x, scm.graph.nodes()),
                       empirical_joint(y, scm.graph.nodes()));
  CHECK(h == doctest::Approx(t).epsilon(1e-12));
}

TEST_CASE("metric traces enforce increasing steps and round-trip through csv") {
  MetricTrace trace;
  trace.columns = {"loss", "tvd"};
  trace.append(0, vec({1.5, 0.9}));
  trace.append(10, vec({0.75, 0.45}));
  trace.append(25, vec({0.125, 0.0625}));
  CHECK_THROWS_AS(trace.append(25, vec({0.1, 0.1})), DomainError);
  CHECK_THROWS_AS(trace.append(30, vec({0.1})), ShapeError);
  CHECK(trace.last("loss") == 0.125);
  CHECK(trace.column("tvd")[1] == 0.45);
  CHECK_THROWS_AS(trace.column("nope"), SchemaError);

  const auto path = (fs::temp_directory_path() / "causalgen_trace.csv").string();
  trace.save_csv(path);
  auto back = MetricTrace::load_csv(path);
  CHECK(back.columns == trace.columns);
  CHECK(back.steps == trace.steps);
  REQUIRE(back.rows.size() == trace.rows.size());
  for (std::size_t r = 0; r < back.rows.size(); ++r)
    CHECK(back.rows[r] == trace.rows[r]);
  std::remove(path.c_str());
}

TEST_CASE("malformed trace csv raises parse errors") {
  const auto path = (fs::temp_directory_path() / "causalgen_trace_bad.csv").string();
  auto write = [&](const std::string& text) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs(text.c_str(), f);
    std::fclose(f);
  };
  write("loss,tvd\n1,2\n");
  CHECK_THROWS_AS(MetricTrace::load_csv(path), ParseError);
  write("step,loss\n0,1.5\n10,oops\n");
  CHECK_THROWS_AS(MetricTrace::load_csv(path), ParseError);
  write("step,loss\n0,1.5\n10\n");
  CHECK_THROWS_AS(MetricTrace::load_csv(path), ParseError);
  write("step,loss\n10,1.5\n0,1.0\n");
  CHECK_THROWS_AS(MetricTrace::load_csv(path), DomainError);
  std::remove(path.c_str());
}

TEST_CASE("report formatting lines up columns") {
  auto text = format_report({"Young", "Male"},
                            {{"data", {0.77362, 0.41675}},
                             {"model", {0.75, 0.43}}});
  CHECK(text.find("Young") != std::string::npos);
  CHECK(text.find("0.77362") != std::string::npos);
  CHECK(text.find("data") != std::string::npos);
  CHECK_THROWS_AS(format_report({"A"}, {{"x", {1.0, 2.0}}}), ShapeError);
}
