#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "causalgen/dataset.hpp"
#include "causalgen/errors.hpp"
#include "causalgen/metrics.hpp"
#include "causalgen/prob_table.hpp"
#include "causalgen/rng.hpp"
#include "causalgen/scm.hpp"

using namespace causalgen;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const char* name) {
  return (fs::temp_directory_path() / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("stand-in scm reproduces the published attribute statistics") {
  auto scm = celeba_standin_scm();
  CHECK(scm.graph.nodes() == celeba_labels());
  auto joint = exact_joint(scm);

  // marginals against the attribute table's data column
  const std::vector<std::pair<std::string, double>> expected = {
      {"Young", 0.77362},       {"Male", 0.41675},
      {"Eyeglasses", 0.06406},  {"Bald", 0.02244},
      {"Mustache", 0.04154},    {"Smiling", 0.48208},
      {"Wearing_Lipstick", 0.47243}, {"Mouth_Slightly_Open", 0.48343},
      {"Narrow_Eyes", 0.11515}};
  for (const auto& [label, value] : expected)
    CHECK(std::abs(marginal(joint, label) - value) < 0.001);

  // pairwise (Young, Male) against the published 2-decimal cells
  auto pair = pairwise_report(joint, "Young", "Male");
  CHECK(std::abs(pair(1, 0) - 0.51) < 0.015);
  CHECK(std::abs(pair(1, 1) - 0.26) < 0.015);
  CHECK(std::abs(pair(0, 0) - 0.07) < 0.015);
  CHECK(std::abs(pair(0, 1) - 0.15) < 0.015);

  // the impossible combination carries exactly zero mass
  auto mm = pairwise_report(joint, "Male", "Mustache");
  CHECK(mm(0, 1) == 0.0);
}

TEST_CASE("dropping the young-male edge costs about 0.137 in tvd") {
  // the closest joint with Male independent of Young keeps every other
  // conditional; its distance to the stand-in anchors the plateau window
  // asserted for generators that assume those labels independent
  auto scm = celeba_standin_scm();
  auto joint = exact_joint(scm);
  const double male = marginal(joint, "Male");

  Scm indep = scm;
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& [p, c] : scm.graph.edges()) {
    const auto pn = scm.graph.name(p), cn = scm.graph.name(c);
    if (!(pn == "Young" && cn == "Male")) edges.emplace_back(pn, cn);
  }
  indep.graph = CausalGraph(scm.graph.nodes(), edges);
  indep.mechanisms[1] = DiscreteTable{Eigen::VectorXd::Constant(1, male)};
  validate_scm(indep);

  const double gap = tvd(exact_joint(indep), joint);
  CHECK(gap == doctest::Approx(0.1373).epsilon(0.01));
  CHECK(gap > 0.09);
  CHECK(gap < 0.19);
}

TEST_CASE("attribute files round-trip through write and ingest") {
  auto scm = celeba_standin_scm();
  auto rows = sample(scm, 500, 321);
  const auto path = temp_path("causalgen_attrs.txt");
  write_celeba_attrs(path, celeba_labels(), rows);

  auto all = ingest_celeba_attrs(path, {});
  CHECK(all.labels == celeba_labels());
  CHECK(all.rows == rows);

  auto some = ingest_celeba_attrs(path, {"Male", "Young"});
  REQUIRE(some.labels == std::vector<std::string>{"Male", "Young"});
  CHECK(some.rows.col(0) == rows.col(1));
  CHECK(some.rows.col(1) == rows.col(0));

  CHECK_THROWS_AS(ingest_celeba_attrs(path, {"Sideburns"}), SchemaError);
  std::remove(path.c_str());

  Eigen::MatrixXd bad(1, 9);
  bad.setConstant(0.25);
  CHECK_THROWS_AS(write_celeba_attrs(path, celeba_labels(), bad), DomainError);
  CHECK_THROWS_AS(write_celeba_attrs(path, {"A"}, Eigen::MatrixXd::Zero(1, 2)),
                  ShapeError);
}

TEST_CASE("attribute parser reports malformed lines by number") {
  const auto path = temp_path("causalgen_attrs_bad.txt");

  write_text(path, "2\nA B\n000001.jpg 1 -1\n000002.jpg 1 2\n");
  CHECK_THROWS_WITH_AS(ingest_celeba_attrs(path, {}),
                       doctest::Contains("line 4"), ParseError);

  write_text(path, "2\nA B\n000001.jpg 1\n000002.jpg 1 -1\n");
  CHECK_THROWS_WITH_AS(ingest_celeba_attrs(path, {}),
                       doctest::Contains("line 3"), ParseError);

  write_text(path, "3\nA B\n000001.jpg 1 -1\n");
  CHECK_THROWS_AS(ingest_celeba_attrs(path, {}), ParseError);

  write_text(path, "nope\nA B\n");
  CHECK_THROWS_WITH_AS(ingest_celeba_attrs(path, {}),
                       doctest::Contains("line 1"), ParseError);

  CHECK_THROWS_AS(ingest_celeba_attrs(temp_path("causalgen_missing.txt"), {}),
                  ParseError);
  std::remove(path.c_str());
}

TEST_CASE("csv round-trips the exact doubles") {
  RngStream r(5, "csv");
  Eigen::MatrixXd m(7, 3);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = r.normal();
  const auto path = temp_path("causalgen_data.csv");
  write_csv(path, {"x", "y", "z"}, m);
  auto back = read_csv(path);
  CHECK(back.labels == std::vector<std::string>{"x", "y", "z"});
  CHECK(back.rows == m);
  std::remove(path.c_str());

  write_text(path, "x,y\n1.0\n");
  CHECK_THROWS_WITH_AS(read_csv(path), doctest::Contains("line 2"), ParseError);
  write_text(path, "x,y\n1.0,zebra\n");
  CHECK_THROWS_AS(read_csv(path), ParseError);
  std::remove(path.c_str());

  CHECK_THROWS_AS(write_csv(path, {"a,b"}, Eigen::MatrixXd::Zero(1, 1)),
                  ParseError);
}

TEST_CASE("file hashing matches the in-memory fnv1a") {
  const auto path = temp_path("causalgen_hash.bin");
  write_text(path, "abc");
  CHECK(fnv1a64_file(path) == fnv1a64("abc"));
  CHECK(fnv1a64_file(path) == 0xe71fa2190541574bull);
  CHECK(hex64(0xe71fa2190541574bull) == "0xe71fa2190541574b");

  write_text(path, "abd");
  CHECK(fnv1a64_file(path) != fnv1a64("abc"));
  std::remove(path.c_str());
  CHECK_THROWS_AS(fnv1a64_file(path), ParseError);
}

TEST_CASE("manifests record config and input hashes") {
  const auto path = temp_path("causalgen_manifest_input.txt");
  write_text(path, "abc");
  nlohmann::ordered_json cfg;
  cfg["seed"] = 11;
  auto m = make_manifest("train-controller", cfg, {{"data", path}});
  CHECK(m["format_version"] == 1);
  CHECK(m["command"] == "train-controller");
  CHECK(m["config"]["seed"] == 11);
  CHECK(m["inputs"]["data"]["fnv1a64"] == "0xe71fa2190541574b");
  CHECK(m["inputs"]["data"]["path"] == path);
  std::remove(path.c_str());
  CHECK_THROWS_AS(make_manifest("x", cfg, {{"data", path}}), ParseError);
}
