#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "causalgen/rng.hpp"
#include "causalgen/tape.hpp"

namespace causalgen {

enum class Activation { kIdentity, kRelu, kTanh, kSigmoid, kSoftmax };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct MlpSpec {
  std::vector<int> widths;  // input width first, output width last
  Activation hidden = Activation::kRelu;
  Activation output = Activation::kIdentity;
};

// weights[l] is widths[l+1] x widths[l], biases[l] is 1 x widths[l+1]
struct Mlp {
  MlpSpec spec;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::MatrixXd> biases;
};

// Glorot-uniform weights (+- sqrt(6 / (fan_in + fan_out))), zero biases.
Mlp init_mlp(const MlpSpec& spec, RngStream& stream);
Mlp init_mlp(const MlpSpec& spec, std::uint64_t seed, std::string_view name);

// Parameters lifted onto a tape for one training step.
struct MlpRef {
  MlpSpec spec;
  std::vector<Value> weights;
  std::vector<Value> biases;
};

MlpRef lift(Tape& tape, const Mlp& mlp);
std::vector<Value> params_of(const MlpRef& ref);      // weights then biases, layer order
std::vector<Eigen::MatrixXd*> params_of(Mlp& mlp);    // same order

// Rows are samples. Hidden activation between layers, output activation on
// the last. The two overloads compute the same function, on and off tape.
Value forward(const MlpRef& net, Value input);
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  long step = 0;
};

AdamState make_adam_state(const std::vector<Eigen::MatrixXd*>& params);

// One bias-corrected Adam update, in place.
void adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<Eigen::MatrixXd>& grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace causalgen
