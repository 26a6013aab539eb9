#include "causalgen/tape.hpp"

#include <cmath>
#include <map>
#include <string>

#include "causalgen/errors.hpp"

namespace causalgen {

namespace {

void check_tape(Value a) {
  if (a.tape == nullptr || a.id < 0)
    throw ShapeError("value is not bound to a tape");
}

void check_same(Value a, Value b) {
  check_tape(a);
  check_tape(b);
  if (a.tape != b.tape)
    throw ShapeError("values belong to different tapes");
}

bool is_scalar(const Eigen::MatrixXd& m) {
  return m.rows() == 1 && m.cols() == 1;
}

std::string shape_str(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

const Eigen::MatrixXd& Value::val() const {
  check_tape(*this);
  return tape->node(id).value;
}

Eigen::Index Value::rows() const { return val().rows(); }
Eigen::Index Value::cols() const { return val().cols(); }

double Value::scalar() const {
  const auto& v = val();
  if (!is_scalar(v)) throw ShapeError("expected a 1x1 value, got " + shape_str(v));
  return v(0, 0);
}

Value Tape::push(Node node) {
  if (!node.value.allFinite())
    throw DomainError("operation produced a non-finite value");
  for (int in : node.inputs)
    node.grad_level = std::max(node.grad_level, nodes_.at(in).grad_level);
  nodes_.push_back(std::move(node));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Value Tape::var(const Eigen::MatrixXd& v) {
  return push(Node{Op::kLeaf, {}, v});
}

Value Tape::var(double scalar) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = scalar;
  return var(m);
}

namespace {

// elementwise combine with 1x1 broadcast on either side
template <typename F>
Eigen::MatrixXd ew(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, F f,
                   const char* opname) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    Eigen::MatrixXd out(a.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        out(i, j) = f(a(i, j), b(i, j));
    return out;
  }
  if (is_scalar(a)) {
    Eigen::MatrixXd out(b.rows(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index i = 0; i < b.rows(); ++i)
        out(i, j) = f(a(0, 0), b(i, j));
    return out;
  }
  if (is_scalar(b)) {
    Eigen::MatrixXd out(a.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        out(i, j) = f(a(i, j), b(0, 0));
    return out;
  }
  throw ShapeError(std::string(opname) + ": incompatible shapes " +
                   shape_str(a) + " and " + shape_str(b));
}

Value binary(Tape::Op op, Value a, Value b, Eigen::MatrixXd result) {
  return a.tape->push(Tape::Node{op, {a.id, b.id}, std::move(result)});
}

template <typename F>
Value unary_map(Tape::Op op, Value a, F f) {
  check_tape(a);
  Eigen::MatrixXd out = a.val().unaryExpr(f);
  return a.tape->push(Tape::Node{op, {a.id}, std::move(out)});
}

}  // namespace

Value add(Value a, Value b) {
  check_same(a, b);
  return binary(Tape::Op::kAdd, a, b,
                ew(a.val(), b.val(), [](double x, double y) { return x + y; },
                   "add"));
}

Value sub(Value a, Value b) {
  check_same(a, b);
  return binary(Tape::Op::kSub, a, b,
                ew(a.val(), b.val(), [](double x, double y) { return x - y; },
                   "sub"));
}

Value mul(Value a, Value b) {
  check_same(a, b);
  return binary(Tape::Op::kMul, a, b,
                ew(a.val(), b.val(), [](double x, double y) { return x * y; },
                   "mul"));
}

Value div(Value a, Value b) {
  check_same(a, b);
  return binary(Tape::Op::kDiv, a, b,
                ew(a.val(), b.val(), [](double x, double y) { return x / y; },
                   "div"));
}

Value matmul(Value a, Value b) {
  check_same(a, b);
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + shape_str(a.val()) + " times " +
                     shape_str(b.val()));
  return binary(Tape::Op::kMatmul, a, b, a.val() * b.val());
}

Value transpose(Value a) {
  check_tape(a);
  return a.tape->push(
      Tape::Node{Tape::Op::kTranspose, {a.id}, a.val().transpose()});
}

Value scale(Value a, double c) {
  check_tape(a);
  Tape::Node n{Tape::Op::kScale, {a.id}, a.val() * c};
  n.scale = c;
  return a.tape->push(std::move(n));
}

Value add_scalar(Value a, double c) {
  check_tape(a);
  Tape::Node n{Tape::Op::kAddScalar, {a.id}, (a.val().array() + c).matrix()};
  n.scale = c;
  return a.tape->push(std::move(n));
}

Value neg(Value a) { return scale(a, -1.0); }

Value sum(Value a) {
  check_tape(a);
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = a.val().sum();
  return a.tape->push(Tape::Node{Tape::Op::kSum, {a.id}, std::move(out)});
}

Value mean(Value a) {
  check_tape(a);
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = a.val().mean();
  return a.tape->push(Tape::Node{Tape::Op::kMean, {a.id}, std::move(out)});
}

Value rowsum(Value a) {
  check_tape(a);
  return a.tape->push(
      Tape::Node{Tape::Op::kRowsum, {a.id}, a.val().rowwise().sum()});
}

Value colsum(Value a) {
  check_tape(a);
  return a.tape->push(
      Tape::Node{Tape::Op::kColsum, {a.id}, a.val().colwise().sum()});
}

Value broadcast_rows(Value a, Eigen::Index n) {
  check_tape(a);
  if (a.rows() != 1)
    throw ShapeError("broadcast_rows needs a 1 x m input, got " +
                     shape_str(a.val()));
  Tape::Node node{Tape::Op::kBroadcastRows, {a.id},
                  a.val().replicate(n, 1)};
  node.i0 = static_cast<int>(n);
  return a.tape->push(std::move(node));
}

Value broadcast_cols(Value a, Eigen::Index m) {
  check_tape(a);
  if (a.cols() != 1)
    throw ShapeError("broadcast_cols needs an n x 1 input, got " +
                     shape_str(a.val()));
  Tape::Node node{Tape::Op::kBroadcastCols, {a.id},
                  a.val().replicate(1, m)};
  node.i0 = static_cast<int>(m);
  return a.tape->push(std::move(node));
}

Value relu(Value a) {
  return unary_map(Tape::Op::kRelu, a,
                   [](double x) { return x > 0.0 ? x : 0.0; });
}

Value tanh(Value a) {
  return unary_map(Tape::Op::kTanh, a, [](double x) { return std::tanh(x); });
}

Value sigmoid(Value a) {
  return unary_map(Tape::Op::kSigmoid, a,
                   [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Value exp(Value a) {
  return unary_map(Tape::Op::kExp, a, [](double x) { return std::exp(x); });
}

Value log(Value a) {
  check_tape(a);
  if ((a.val().array() <= 0.0).any())
    throw DomainError("log of a non-positive entry");
  return unary_map(Tape::Op::kLog, a, [](double x) { return std::log(x); });
}

Value square(Value a) {
  return unary_map(Tape::Op::kSquare, a, [](double x) { return x * x; });
}

Value sqrt(Value a) {
  check_tape(a);
  if ((a.val().array() < 0.0).any())
    throw DomainError("sqrt of a negative entry");
  return unary_map(Tape::Op::kSqrt, a, [](double x) { return std::sqrt(x); });
}

Value abs(Value a) {
  return unary_map(Tape::Op::kAbs, a, [](double x) { return std::abs(x); });
}

Value clamp(Value a, double lo, double hi) {
  check_tape(a);
  if (!(lo < hi)) throw DomainError("clamp needs lo < hi");
  Tape::Node n{Tape::Op::kClamp, {a.id},
               a.val().array().max(lo).min(hi).matrix()};
  n.scale = lo;
  n.scale2 = hi;
  return a.tape->push(std::move(n));
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  check_tape(parts[0]);
  Tape* tape = parts[0].tape;
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    check_same(parts[0], p);
    if (p.rows() != rows)
      throw ShapeError("concat_cols: row mismatch between parts");
    cols += p.cols();
  }
  Eigen::MatrixXd out(rows, cols);
  Tape::Node node{Tape::Op::kConcatCols, {}, {}};
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.val();
    at += p.cols();
    node.inputs.push_back(p.id);
  }
  node.value = std::move(out);
  return tape->push(std::move(node));
}

Value slice_cols(Value a, Eigen::Index start, Eigen::Index len) {
  check_tape(a);
  if (start < 0 || len < 0 || start + len > a.cols())
    throw ShapeError("slice_cols [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of range for " +
                     shape_str(a.val()));
  Tape::Node node{Tape::Op::kSliceCols, {a.id}, a.val().middleCols(start, len)};
  node.i0 = static_cast<int>(start);
  node.i1 = static_cast<int>(len);
  return a.tape->push(std::move(node));
}

Value pad_cols(Value a, Eigen::Index total, Eigen::Index start) {
  check_tape(a);
  if (start < 0 || start + a.cols() > total)
    throw ShapeError("pad_cols target does not fit");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows(), total);
  out.middleCols(start, a.cols()) = a.val();
  Tape::Node node{Tape::Op::kPadCols, {a.id}, std::move(out)};
  node.i0 = static_cast<int>(start);
  node.i1 = static_cast<int>(a.cols());
  return a.tape->push(std::move(node));
}

Value l2_norm(Value a) { return sqrt(sum(square(a))); }

Value softmax_rows(Value a) {
  check_tape(a);
  // subtracting the rowwise max as a constant changes neither the value nor
  // the gradient, and keeps exp in range
  Eigen::MatrixXd shift = a.val().rowwise().maxCoeff();
  Value c = a.tape->var(shift);
  Value centered = sub(a, broadcast_cols(c, a.cols()));
  Value e = exp(centered);
  return div(e, broadcast_cols(rowsum(e), a.cols()));
}

namespace {

// reduce a gradient contribution back to the operand's shape after a 1x1
// broadcast in a binary op
Value reduce_to(Value g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return sum(g);
  throw ShapeError("cannot reduce gradient to operand shape");
}

Value scalar_to(Value g, Eigen::Index rows, Eigen::Index cols) {
  Value row = cols == 1 ? g : broadcast_cols(g, cols);
  return rows == 1 ? row : broadcast_rows(row, rows);
}

// Adjoints are built with ordinary tape ops so that the result of one
// backward pass can be differentiated again. Derivative factors of smooth
// ops are expressions over the forward nodes; piecewise-constant factors
// (relu, abs, clamp masks) are frozen as constants, which is exact away
// from the kinks and picks 0 at them.
std::map<int, int> backward(Tape& t, Value output) {
  check_tape(output);
  if (output.rows() != 1 || output.cols() != 1)
    throw ShapeError("gradient needs a 1x1 output, got " +
                     shape_str(output.val()));
  std::map<int, int> adj;
  adj[output.id] = t.var(1.0).id;

  for (int id = output.id; id >= 0; --id) {
    auto it = adj.find(id);
    if (it == adj.end()) continue;
    const Tape::Node& n = t.node(id);
    if (n.inputs.empty()) continue;
    Value g{&t, it->second};
    Value self{&t, id};

    auto acc = [&](int input, Value contrib) {
      auto jt = adj.find(input);
      if (jt == adj.end())
        adj[input] = contrib.id;
      else
        jt->second = add(Value{&t, jt->second}, contrib).id;
    };
    auto in = [&](int k) { return Value{&t, n.inputs[k]}; };
    auto shape_of = [&](int k) {
      const auto& v = t.node(n.inputs[k]).value;
      return std::pair<Eigen::Index, Eigen::Index>{v.rows(), v.cols()};
    };

    switch (n.op) {
      case Tape::Op::kAdd: {
        auto [ar, ac] = shape_of(0);
        auto [br, bc] = shape_of(1);
        acc(n.inputs[0], reduce_to(g, ar, ac));
        acc(n.inputs[1], reduce_to(g, br, bc));
        break;
      }
      case Tape::Op::kSub: {
        auto [ar, ac] = shape_of(0);
        auto [br, bc] = shape_of(1);
        acc(n.inputs[0], reduce_to(g, ar, ac));
        acc(n.inputs[1], reduce_to(neg(g), br, bc));
        break;
      }
      case Tape::Op::kMul: {
        auto [ar, ac] = shape_of(0);
        auto [br, bc] = shape_of(1);
        acc(n.inputs[0], reduce_to(mul(g, in(1)), ar, ac));
        acc(n.inputs[1], reduce_to(mul(g, in(0)), br, bc));
        break;
      }
      case Tape::Op::kDiv: {
        auto [ar, ac] = shape_of(0);
        auto [br, bc] = shape_of(1);
        acc(n.inputs[0], reduce_to(div(g, in(1)), ar, ac));
        acc(n.inputs[1],
            reduce_to(neg(div(mul(g, in(0)), square(in(1)))), br, bc));
        break;
      }
      case Tape::Op::kMatmul:
        acc(n.inputs[0], matmul(g, transpose(in(1))));
        acc(n.inputs[1], matmul(transpose(in(0)), g));
        break;
      case Tape::Op::kTranspose:
        acc(n.inputs[0], transpose(g));
        break;
      case Tape::Op::kScale:
        acc(n.inputs[0], scale(g, n.scale));
        break;
      case Tape::Op::kAddScalar:
        acc(n.inputs[0], g);
        break;
      case Tape::Op::kSum: {
        auto [ar, ac] = shape_of(0);
        acc(n.inputs[0], scalar_to(g, ar, ac));
        break;
      }
      case Tape::Op::kMean: {
        auto [ar, ac] = shape_of(0);
        acc(n.inputs[0],
            scale(scalar_to(g, ar, ac), 1.0 / static_cast<double>(ar * ac)));
        break;
      }
      case Tape::Op::kRowsum: {
        auto [ar, ac] = shape_of(0);
        acc(n.inputs[0], broadcast_cols(g, ac));
        break;
      }
      case Tape::Op::kColsum: {
        auto [ar, ac] = shape_of(0);
        acc(n.inputs[0], broadcast_rows(g, ar));
        break;
      }
      case Tape::Op::kBroadcastRows:
        acc(n.inputs[0], colsum(g));
        break;
      case Tape::Op::kBroadcastCols:
        acc(n.inputs[0], rowsum(g));
        break;
      case Tape::Op::kRelu: {
        Eigen::MatrixXd mask = t.node(n.inputs[0]).value.unaryExpr(
            [](double x) { return x > 0.0 ? 1.0 : 0.0; });
        acc(n.inputs[0], mul(g, t.var(mask)));
        break;
      }
      case Tape::Op::kTanh:
        acc(n.inputs[0], mul(g, add_scalar(neg(square(self)), 1.0)));
        break;
      case Tape::Op::kSigmoid:
        acc(n.inputs[0], mul(g, mul(self, add_scalar(neg(self), 1.0))));
        break;
      case Tape::Op::kExp:
        acc(n.inputs[0], mul(g, self));
        break;
      case Tape::Op::kLog:
        acc(n.inputs[0], div(g, in(0)));
        break;
      case Tape::Op::kSquare:
        acc(n.inputs[0], scale(mul(g, in(0)), 2.0));
        break;
      case Tape::Op::kSqrt:
        acc(n.inputs[0], div(g, scale(self, 2.0)));
        break;
      case Tape::Op::kAbs: {
        Eigen::MatrixXd sign = t.node(n.inputs[0]).value.unaryExpr(
            [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
        acc(n.inputs[0], mul(g, t.var(sign)));
        break;
      }
      case Tape::Op::kClamp: {
        const double lo = n.scale, hi = n.scale2;
        Eigen::MatrixXd inside = t.node(n.inputs[0]).value.unaryExpr(
            [lo, hi](double x) { return x > lo && x < hi ? 1.0 : 0.0; });
        acc(n.inputs[0], mul(g, t.var(inside)));
        break;
      }
      case Tape::Op::kConcatCols: {
        Eigen::Index at = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const Eigen::Index w = t.node(n.inputs[k]).value.cols();
          acc(n.inputs[k], slice_cols(g, at, w));
          at += w;
        }
        break;
      }
      case Tape::Op::kSliceCols: {
        auto [ar, ac] = shape_of(0);
        acc(n.inputs[0], pad_cols(g, ac, n.i0));
        break;
      }
      case Tape::Op::kPadCols:
        acc(n.inputs[0], slice_cols(g, n.i0, n.i1));
        break;
      case Tape::Op::kGradMarker:
        acc(n.inputs[0], g);
        break;
      case Tape::Op::kLeaf:
        break;
    }
  }
  return adj;
}

}  // namespace

std::vector<Eigen::MatrixXd> Tape::gradient(Value output,
                                            const std::vector<Value>& wrt) {
  for (Value w : wrt) {
    check_tape(w);
    if (w.tape != this) throw ShapeError("wrt value bound to another tape");
  }
  auto adj = backward(*this, output);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(wrt.size());
  for (Value w : wrt) {
    auto it = adj.find(w.id);
    if (it == adj.end())
      out.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    else
      out.push_back(nodes_.at(it->second).value);
  }
  return out;
}

Value Tape::gradient_as_value(Value output, Value wrt) {
  check_tape(output);
  check_tape(wrt);
  if (output.tape != this || wrt.tape != this)
    throw ShapeError("values bound to another tape");
  const int out_level = nodes_.at(output.id).grad_level;
  if (out_level >= 1)
    throw NestingUnsupported(
        "output already depends on a gradient_as_value result; only one "
        "nesting level is supported");
  auto adj = backward(*this, output);
  int src;
  auto it = adj.find(wrt.id);
  if (it != adj.end())
    src = it->second;
  else
    src = var(Eigen::MatrixXd::Zero(wrt.rows(), wrt.cols())).id;
  Node marker{Op::kGradMarker, {src}, nodes_.at(src).value};
  marker.grad_level = out_level + 1;
  return push(std::move(marker));
}

}  // namespace causalgen
