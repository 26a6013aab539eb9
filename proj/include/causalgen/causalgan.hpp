#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "causalgen/controller.hpp"
#include "causalgen/metrics.hpp"
#include "causalgen/nn.hpp"
#include "causalgen/rng.hpp"
#include "causalgen/tape.hpp"

namespace causalgen {

// CausalGAN: a conditional GAN whose labels come from a trained Causal
// Controller. Four networks: conditional generator, discriminator, Labeler
// (trained on real data) and Anti-Labeler (trained on generated data). The
// generator minimizes the GAN term plus the Labeler's cross entropy on its
// own samples, minus a decaying multiple of the Anti-Labeler's.

enum class LabelerVariant {
  kPerLabel,  // d sigmoid outputs, loss averaged over labels
  kJoint,     // 2^d softmax outputs over label combinations
};

struct CgTrainConfig {
  int gen_updates = 6;       // generator updates per critic update
  double decay_T = 3000.0;   // time constant of the Anti-Labeler coefficient
  bool swapped_ce = true;    // swap cross-entropy argument order in the
                             // generator's labeler terms
  LabelerVariant variant = LabelerVariant::kPerLabel;
  bool global_rho = false;   // weight the Labeler loss with dataset label
                             // frequencies instead of per-batch ones
  double lr_gen = 2e-4;      // paper leaves this open; 2e-4 recorded here
  double lr_critic = 2e-4;
  int batch = 64;
  int iters = 1000;          // critic cycles; total generator updates is
                             // iters * gen_updates
  int noise_width = 4;       // generator z2 width, uniform [-1, 1]
  int gen_depth = 3;         // weight layers
  int gen_width = 32;
  int disc_depth = 3;
  int disc_width = 32;
  int labeler_depth = 3;
  int labeler_width = 32;
  Activation gen_hidden = Activation::kTanh;
  Activation disc_hidden = Activation::kTanh;
  Activation labeler_hidden = Activation::kRelu;
  int trace_every = 10;
  std::uint64_t seed = 0;
};

// label_count is needed because the joint variant is only allowed for
// d <= 4 (the 2^d output head does not scale past that).
void validate(const CgTrainConfig& cfg, int label_count);

// Maps (z2, rounded label vector) to a feature vector. Deterministic given
// its inputs; label entries must be exactly 0 or 1.
struct CondGenerator {
  Mlp net;
  int noise_width = 0;
  int label_count = 0;
};

struct CausalGan {
  CondGenerator gen;
  Mlp disc;         // sigmoid head, output in (0, 1)
  Mlp labeler;      // d sigmoid outputs or 2^d softmax outputs
  Mlp antilabeler;  // same shape as labeler
  LabelerVariant variant = LabelerVariant::kPerLabel;
};

CausalGan build_causalgan(int feature_width, int label_count,
                          const CgTrainConfig& cfg, RngStream& stream);
CausalGan build_causalgan(int feature_width, int label_count,
                          const CgTrainConfig& cfg);

Eigen::MatrixXd cond_generator_forward(const CondGenerator& gen,
                                       const Eigen::MatrixXd& noise,
                                       const Eigen::MatrixXd& labels);

// Labeler objective, negated for minimization. Per-label variant: for each
// label j, rho_j * E[log D(x)[j] | l_j=1] + (1-rho_j) * E[log(1-D(x)[j]) |
// l_j=0], averaged over labels, with rho_j the batch frequency (equal to
// the plain batch-mean cross entropy). Joint variant: mean log D(x)[index(l)]
// where index packs the label row little-endian (bit j = label j, matching
// ProbTable). Logs are clamped at 1e-7.
Value labeler_loss(Value outputs, const Eigen::MatrixXd& labels,
                   LabelerVariant variant);

// Same, but with fixed (dataset-level) label frequencies instead of batch
// ones. Per-label variant only.
Value labeler_loss(Value outputs, const Eigen::MatrixXd& labels,
                   LabelerVariant variant, const Eigen::VectorXd& rho);

// Expectation form: each support row carries an explicit probability weight.
// Used to evaluate losses exactly on finite support.
Value labeler_loss_weighted(Value outputs, const Eigen::MatrixXd& labels,
                            const Eigen::VectorXd& row_weights,
                            LabelerVariant variant);

// Identical in form to labeler_loss; the semantic difference is that the
// batch is generated and the targets are the labels the Causal Controller
// fed the generator.
Value antilabeler_loss(Value outputs, const Eigen::MatrixXd& labels,
                       LabelerVariant variant);
Value antilabeler_loss(Value outputs, const Eigen::MatrixXd& labels,
                       LabelerVariant variant, const Eigen::VectorXd& rho);

// Discriminator objective, negated: -( mean log D(x_real) +
// mean [log(1 - D(x_fake)) - log D(x_fake)] ). The extra -log D term on
// fakes is part of the architecture, not an optimization trick. Outputs
// must lie strictly inside (0, 1); DomainError if any entry hits 0 or 1
// exactly. Logs are clamped at 1e-7.
Value discriminator_loss(Value d_real, Value d_fake);

// mean [log(1 - D(x_fake)) - log D(x_fake)], the part of the GAN objective
// the generator can move.
Value generator_gan_term(Value d_fake);

// The Labeler / Anti-Labeler cross entropy as seen by the generator, with
// the batch-frequency weighting of labeler_loss. With cfg.swapped_ce the
// argument order is swapped: prediction * log(clamped target) instead of
// target * log(clamped prediction), which leaves a constant-slope penalty
// on the wrong side (log 1e-7 is about -16.118).
Value generator_label_term(Value outputs, const Eigen::MatrixXd& labels,
                           const CgTrainConfig& cfg);

double antilabeler_decay(long t, const CgTrainConfig& cfg);

// Full generator loss at iteration t: gan term computed from d_fake, plus
// labeler_term, minus exp(-t/T) * antilabeler_term. The label terms are
// scalar losses already built by generator_label_term (or, for exact
// evaluations, labeler_loss_weighted).
Value generator_loss(Value d_fake, Value labeler_term, Value antilabeler_term,
                     long t, const CgTrainConfig& cfg);

// As above with the gan term precomputed, for evaluating the loss surface
// symbolically (the data-side expectation of log D is constant in G and is
// dropped from the d_fake form, but belongs in the full criterion).
Value generator_loss_from_terms(Value gan_term, Value labeler_term,
                                Value antilabeler_term, long t,
                                const CgTrainConfig& cfg);

struct CgData {
  Eigen::MatrixXd features;  // rows x feature_width
  Eigen::MatrixXd labels;    // rows x d, entries exactly 0 or 1
  std::vector<std::string> label_names;
};

// One critic cycle per iteration: the discriminator, Labeler and
// Anti-Labeler gradients are all computed from the same parameter snapshot
// and applied together, then exactly cfg.gen_updates generator updates
// follow. Labels for generated batches are drawn from the controller and
// rounded. Trace columns: d_loss, g_loss, labeler_loss, antilabeler_loss,
// decay_coeff.
MetricTrace train_causalgan(CausalGan& gan, const GraphGenerator& controller,
                            const CgData& data, const CgTrainConfig& cfg);

enum class SampleMode { kObserve, kDo, kCondition };

struct JointSamples {
  Eigen::MatrixXd labels;    // n x d, rounded
  Eigen::MatrixXd features;  // n x feature_width
};

// Samples (label, feature) pairs from the concatenated model. observe:
// labels = round(controller(z1)). do: controller_do_forward with the
// assignment. condition: rejection sampling on rounded controller labels
// (ImpossibleEvidence if the acceptance rate falls below the 1e-4 floor).
// Assignment values must be 0 or 1; observe mode takes none.
JointSamples sample_joint(
    const GraphGenerator& controller, const CondGenerator& gen, int n,
    SampleMode mode,
    const std::vector<std::pair<std::string, double>>& assignment,
    std::uint64_t seed);

}  // namespace causalgen
