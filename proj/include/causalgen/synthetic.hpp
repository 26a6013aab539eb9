#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "causalgen/controller.hpp"
#include "causalgen/graph.hpp"

namespace causalgen {

// The three-feature benchmark graphs: "line" X->Y->Z, "collider" X->Y<-Z,
// "complete" X->Y->Z plus X->Z.
CausalGraph synthetic_graph(const std::string& name);

struct SyntheticPanelConfig {
  int seeds = 20;           // independent data/model draws averaged together
  int n_train = 4096;       // rows per training dataset
  int n_reference = 200000; // fresh rows defining the target histogram
  int n_eval_final = 100000;
  ControllerConfig train;   // shared training settings (continuous mode)
  std::uint64_t seed = 0;
};

// Training settings sized for the three-feature problem on one CPU core.
SyntheticPanelConfig default_synthetic_config();

// One generator architecture's averaged outcome on one data graph.
struct SyntheticRun {
  std::string generator;       // line | collider | complete | fc3 | fc5 | fc10
  std::vector<long> steps;
  Eigen::VectorXd mean_tvd;    // trace tvd averaged over seeds
  double final_tvd = 0.0;      // large-sample tvd after training, averaged
};

// Draws a cubic SCM over data_graph per seed, trains every requested
// generator on the same dataset, and averages histogram TVDs to the true
// distribution (approximated by a large fresh sample from the SCM).
std::vector<SyntheticRun> run_synthetic_panel(
    const std::string& data_graph, const std::vector<std::string>& generators,
    const SyntheticPanelConfig& cfg);

}  // namespace causalgen
