#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "causalgen/dataset.hpp"
#include "causalgen/graph.hpp"
#include "causalgen/metrics.hpp"
#include "causalgen/nn.hpp"
#include "causalgen/rng.hpp"
#include "causalgen/tape.hpp"

namespace causalgen {

struct ControllerConfig {
  int critic_iters = 25;    // critic updates per generator update
  double lr = 0.0008;       // both networks, Adam beta1 = 0, beta2 = 0.9
  double lambda_gp = 10.0;  // gradient penalty coefficient
  int batch = 256;
  int noise_per_node = 10;  // uniform [-1, 1] dims in each node's slice
  int gen_depth = 6;        // weight layers per subnetwork
  int gen_width = 64;       // hidden width per subnetwork
  int critic_hidden = 3;    // hidden layers in the critic
  int critic_width = 128;
  int gen_updates = 20000;
  int eval_every = 100;     // trace cadence, in generator updates
  int eval_samples = 10000; // draws per trace tvd evaluation
  std::uint64_t seed = 0;
  Activation gen_hidden = Activation::kRelu;
  Activation gen_output = Activation::kSigmoid;  // tanh for continuous data
  bool discrete_tvd = true;  // rounded-joint tvd; false = histogram tvd
  int bins = 10;             // histogram bins per coordinate
};

void validate(const ControllerConfig& cfg);

// One subnetwork per node mapping (parent outputs in ascending node order,
// then this node's noise slice) to a scalar. The slices partition
// [0, noise_width).
struct GraphGenerator {
  CausalGraph graph;
  std::vector<Mlp> nets;                    // node order
  std::vector<std::pair<int, int>> slices;  // node order, [begin, end)
  int noise_width = 0;
};

// Baseline without graph structure: the whole noise vector through one net.
struct FcGenerator {
  Mlp net;
};

using LabelGenerator = std::variant<GraphGenerator, FcGenerator>;

GraphGenerator build_graph_generator(const CausalGraph& g,
                                     const ControllerConfig& cfg,
                                     RngStream& stream);
GraphGenerator build_graph_generator(const CausalGraph& g,
                                     const ControllerConfig& cfg);

// depth must be 3, 5 or 10; noise width matches the graph generator's
// d * noise_per_node so baselines consume identical noise.
FcGenerator build_fc_baseline(int depth, int d, const ControllerConfig& cfg,
                              RngStream& stream);

Mlp build_critic(int d, const ControllerConfig& cfg, RngStream& stream);

// Batched evaluation, one row per sample, nodes in topological order.
Eigen::MatrixXd controller_forward(const GraphGenerator& gen,
                                   const Eigen::MatrixXd& z);

// Intervened nodes are clamped before any child reads them; everything
// upstream is computed exactly as in controller_forward.
Eigen::MatrixXd controller_do_forward(const GraphGenerator& gen,
                                      const Eigen::MatrixXd& z,
                                      const std::map<std::string, double>& s);

int generator_noise_width(const LabelGenerator& gen);
int generator_label_count(const LabelGenerator& gen);
Eigen::MatrixXd generator_forward(const LabelGenerator& gen,
                                  const Eigen::MatrixXd& z);
std::vector<Eigen::MatrixXd*> generator_params(LabelGenerator& gen);

// Tape-side mirror for training steps.
struct GeneratorRef {
  const GraphGenerator* graph_gen = nullptr;
  const FcGenerator* fc_gen = nullptr;
  std::vector<MlpRef> nets;
};

GeneratorRef lift_generator(Tape& tape, const LabelGenerator& gen);
Value generator_forward(const GeneratorRef& ref, Value z);
std::vector<Value> generator_params(const GeneratorRef& ref);

// Threshold at 0.5, ties to 1. Entries must already lie in [0, 1].
Eigen::MatrixXd round_labels(const Eigen::MatrixXd& v);

// probe(i, j) = max |d G_i / d z_k| over k in node j's slice, over a batch
// of probe points. Definition-1 wiring forces exact zeros whenever j is
// neither i nor an ancestor of i.
Eigen::MatrixXd consistency_probe(const GraphGenerator& gen, int rows,
                                  std::uint64_t seed);
bool check_graph_consistency(const GraphGenerator& gen, int rows = 16,
                             std::uint64_t seed = 0);

// mean((||grad_xhat critic(xhat)|| - 1)^2) at xhat = eps*real + (1-eps)*fake,
// differentiable in the critic parameters. eps is a batch x 1 column.
Value gradient_penalty(Tape& tape, const MlpRef& critic, Value real,
                       Value fake, Value eps);

// Alternating WGAN-GP loop: cfg.critic_iters critic updates (minimizing
// mean(critic(fake)) - mean(critic(real)) + lambda_gp * penalty), then one
// generator update (maximizing mean(critic(fake))). The trace records
// step, wasserstein_estimate, gradient_penalty, tvd at cfg.eval_every.
// tvd_reference, when given, replaces the training data in the tvd metric
// (used by the synthetic harness to compare against a large fresh sample).
MetricTrace train_controller(LabelGenerator& gen, Mlp& critic,
                             const LabelDataset& data,
                             const ControllerConfig& cfg,
                             const Eigen::MatrixXd* tvd_reference = nullptr);

}  // namespace causalgen
