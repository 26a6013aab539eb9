#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>

#include "causalgen/causalgan.hpp"
#include "causalgen/controller.hpp"
#include "causalgen/metrics.hpp"
#include "causalgen/nn.hpp"
#include "causalgen/rng.hpp"
#include "causalgen/tape.hpp"

namespace causalgen {

// CausalBEGAN: boundary-equilibrium GAN with label margins. The
// discriminator is an autoencoder scored by L1 reconstruction error; three
// margin coefficients c1, c2, c3 balance real/fake reconstruction, the
// label squared losses, and a margin of margins b3 that delays label
// pressure on the generator until image quality has caught up.

// Margin coefficients and their control parameters. The c's are clipped to
// [0, 1] after every update; they start at 0 so training opens with a
// pure-reconstruction warmup.
struct MarginState {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  double gamma1 = 0.5, gamma2 = 0.5, gamma3 = 0.5;
  double lambda1 = 0.001, lambda2 = 0.00008, lambda3 = 0.01;
};

struct Margins {
  double b1 = 0.0, b2 = 0.0, b3 = 0.0;
};

// b1 = gamma1 * L(x) - L(G); b2 = gamma2 * Lsq_real - Lsq_fake;
// b3 = gamma3 * relu(b1) - relu(b2). Loss inputs are assumed nonnegative.
Margins compute_margins(double l_real, double l_fake, double lsq_real,
                        double lsq_fake, const MarginState& state);

// c_k <- clip_[0,1](c_k + lambda_k * b_k), each coefficient independently.
MarginState update_coeffs(const MarginState& state, double b1, double b2,
                          double b3);

// Loss_D = L(x) - c1 * L(G) + Lsq_real - c2 * Lsq_fake
// Loss_G = L(G) + c3 * Lsq_fake
// All four inputs must be scalar Values from one tape.
std::pair<Value, Value> began_losses(Value l_real, Value l_fake,
                                     Value lsq_real, Value lsq_fake,
                                     const MarginState& state);

// M_complete = L(x) + |b1| + |b2| + |b3|, the convergence scalar.
double m_complete(double l_real, double b1, double b2, double b3);

// Autoencoder discriminator over feature vectors, plus the Labeler used by
// the label margins. With shared_labeler the Labeler is a head on the
// encoder's code (single-discriminator spirit); otherwise it is a separate
// network on the raw features.
struct AutoencoderDisc {
  Mlp encoder;       // feature -> code
  Mlp decoder;       // code -> feature
  Mlp labeler_head;  // code -> d sigmoids, or feature -> d sigmoids
  bool shared_labeler = true;
};

struct AeRef {
  MlpRef encoder, decoder, labeler_head;
  bool shared_labeler = true;
};

AeRef lift(Tape& tape, const AutoencoderDisc& disc);

Value reconstruction(const AeRef& disc, Value x);
Eigen::MatrixXd reconstruction(const AutoencoderDisc& disc,
                               const Eigen::MatrixXd& x);

// Mean absolute reconstruction error, the BEGAN L(x). Nonnegative.
Value recon_loss(const AeRef& disc, Value x);
double recon_loss(const AutoencoderDisc& disc, const Eigen::MatrixXd& x);

Value labeler_forward(const AeRef& disc, Value x);
Eigen::MatrixXd labeler_forward(const AutoencoderDisc& disc,
                                const Eigen::MatrixXd& x);

// Mean squared error between labeler outputs and binary labels, the Lsq of
// the margin system.
Value label_sq_loss(Value outputs, const Eigen::MatrixXd& labels);

struct BeganTrainConfig {
  double gamma1 = 0.5, gamma2 = 0.5, gamma3 = 0.5;
  double lambda1 = 0.001, lambda2 = 0.00008, lambda3 = 0.01;
  double lr = 0.00008;  // one rate for generator and discriminator
  int batch = 64;
  int iters = 1000;
  int noise_width = 4;
  int gen_depth = 3, gen_width = 32;
  int enc_depth = 2, enc_width = 32;
  int code_width = 8;
  int dec_depth = 2, dec_width = 32;
  int head_depth = 2, head_width = 32;
  bool shared_labeler = true;
  bool fixed_c3 = false;  // ablation: pin c3 = 1 (naive generator loss)
  Activation gen_hidden = Activation::kTanh;
  Activation disc_hidden = Activation::kTanh;
  Activation labeler_hidden = Activation::kRelu;
  int trace_every = 10;
  std::uint64_t seed = 0;
};

void validate(const BeganTrainConfig& cfg);

struct CausalBegan {
  CondGenerator gen;
  AutoencoderDisc disc;
};

CausalBegan build_causalbegan(int feature_width, int label_count,
                              const BeganTrainConfig& cfg, RngStream& stream);
CausalBegan build_causalbegan(int feature_width, int label_count,
                              const BeganTrainConfig& cfg);

// One simultaneous update of generator and discriminator per iteration:
// both gradient sets are computed from the same parameter snapshot (and the
// same batch) before either is applied. Margins are updated each step from
// the discriminator-side loss values. Trace columns: L_real, L_fake, b1,
// b2, b3, c1, c2, c3, m_complete (coefficients as of the end of the step).
MetricTrace train_causalbegan(CausalBegan& began,
                              const GraphGenerator& controller,
                              const CgData& data,
                              const BeganTrainConfig& cfg);

}  // namespace causalgen
