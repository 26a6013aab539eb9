#include "causalgen/nn.hpp"

#include <cmath>

#include "causalgen/errors.hpp"

namespace causalgen {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmax: return "softmax";
  }
  throw DomainError("unreachable activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "softmax") return Activation::kSoftmax;
  throw SchemaError("unknown activation '" + name + "'");
}

namespace {

void check_spec(const MlpSpec& spec) {
  if (spec.widths.size() < 2)
    throw ShapeError("an mlp needs at least input and output widths");
  for (int w : spec.widths)
    if (w < 1) throw ShapeError("layer widths must be positive");
}

}  // namespace

Mlp init_mlp(const MlpSpec& spec, RngStream& stream) {
  check_spec(spec);
  Mlp net{spec, {}, {}};
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const int fan_in = spec.widths[l];
    const int fan_out = spec.widths[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        w(i, j) = stream.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::MatrixXd::Zero(1, fan_out));
  }
  return net;
}

Mlp init_mlp(const MlpSpec& spec, std::uint64_t seed, std::string_view name) {
  RngStream stream(seed, name);
  return init_mlp(spec, stream);
}

MlpRef lift(Tape& tape, const Mlp& mlp) {
  MlpRef ref{mlp.spec, {}, {}};
  for (const auto& w : mlp.weights) ref.weights.push_back(tape.var(w));
  for (const auto& b : mlp.biases) ref.biases.push_back(tape.var(b));
  return ref;
}

std::vector<Value> params_of(const MlpRef& ref) {
  std::vector<Value> out = ref.weights;
  out.insert(out.end(), ref.biases.begin(), ref.biases.end());
  return out;
}

std::vector<Eigen::MatrixXd*> params_of(Mlp& mlp) {
  std::vector<Eigen::MatrixXd*> out;
  for (auto& w : mlp.weights) out.push_back(&w);
  for (auto& b : mlp.biases) out.push_back(&b);
  return out;
}

namespace {

Value apply_activation(Value z, Activation act) {
  switch (act) {
    case Activation::kIdentity: return z;
    case Activation::kRelu: return relu(z);
    case Activation::kTanh: return tanh(z);
    case Activation::kSigmoid: return sigmoid(z);
    case Activation::kSoftmax: return softmax_rows(z);
  }
  throw DomainError("unreachable activation");
}

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z.unaryExpr([](double x) { return x > 0.0 ? x : 0.0; });
    case Activation::kTanh:
      return z.unaryExpr([](double x) { return std::tanh(x); });
    case Activation::kSigmoid:
      return z.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    case Activation::kSoftmax: {
      Eigen::MatrixXd out(z.rows(), z.cols());
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double shift = z.row(i).maxCoeff();
        Eigen::ArrayXd e = (z.row(i).array() - shift).exp();
        out.row(i) = (e / e.sum()).matrix();
      }
      return out;
    }
  }
  throw DomainError("unreachable activation");
}

}  // namespace

Value forward(const MlpRef& net, Value input) {
  if (input.cols() != net.spec.widths.front())
    throw ShapeError("mlp expects " + std::to_string(net.spec.widths.front()) +
                     " input columns, got " + std::to_string(input.cols()));
  Value h = input;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Value z = add(matmul(h, transpose(net.weights[l])),
                  broadcast_rows(net.biases[l], h.rows()));
    const bool last = l + 1 == net.weights.size();
    h = apply_activation(z, last ? net.spec.output : net.spec.hidden);
  }
  return h;
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input) {
  if (input.cols() != net.spec.widths.front())
    throw ShapeError("mlp expects " + std::to_string(net.spec.widths.front()) +
                     " input columns, got " + std::to_string(input.cols()));
  Eigen::MatrixXd h = input;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Eigen::MatrixXd wt = net.weights[l].transpose();
    Eigen::MatrixXd z = h * wt;
    z.rowwise() += net.biases[l].row(0);
    const bool last = l + 1 == net.weights.size();
    h = apply_activation(z, last ? net.spec.output : net.spec.hidden);
  }
  return h;
}

AdamState make_adam_state(const std::vector<Eigen::MatrixXd*>& params) {
  AdamState state;
  for (const auto* p : params) {
    state.m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    state.v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }
  return state;
}

void adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<Eigen::MatrixXd>& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const auto& g = grads[k];
    if (p.rows() != g.rows() || p.cols() != g.cols())
      throw ShapeError("adam_step: gradient shape mismatch");
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
    state.v[k] = cfg.beta2 * state.v[k].array().matrix() +
                 (1.0 - cfg.beta2) * g.array().square().matrix();
    const Eigen::ArrayXXd mhat = state.m[k].array() / c1;
    const Eigen::ArrayXXd vhat = state.v[k].array() / c2;
    p.array() -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
  }
}

}  // namespace causalgen
