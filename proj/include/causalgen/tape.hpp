#pragma once

#include <Eigen/Dense>

#include <deque>
#include <vector>

namespace causalgen {

class Tape;

// Handle to one tape node. Cheap to copy; valid for the tape's lifetime.
struct Value {
  Tape* tape = nullptr;
  int id = -1;
  const Eigen::MatrixXd& val() const;
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  double scalar() const;  // 1x1 only, ShapeError otherwise
};

// Reverse-mode tape over double matrices. Values are computed eagerly and
// every op result is checked for NaN/Inf. The backward pass is built out of
// ordinary tape ops, so gradients of gradients work: gradient_as_value
// returns a node the tape can differentiate one more time. Deeper nesting is
// rejected.
class Tape {
 public:
  enum class Op {
    kLeaf, kAdd, kSub, kMul, kDiv, kMatmul, kTranspose, kScale, kAddScalar,
    kSum, kMean, kRowsum, kColsum, kBroadcastRows, kBroadcastCols,
    kRelu, kTanh, kSigmoid, kExp, kLog, kSquare, kSqrt, kAbs, kClamp,
    kConcatCols, kSliceCols, kPadCols, kGradMarker
  };

  Value var(const Eigen::MatrixXd& v);
  Value var(double scalar);

  int size() const { return static_cast<int>(nodes_.size()); }

  // d(output)/d(wrt) for a 1x1 output, as detached matrices. Inputs the
  // output does not depend on get zero matrices.
  std::vector<Eigen::MatrixXd> gradient(Value output,
                                        const std::vector<Value>& wrt);

  // Same, but the gradient stays on the tape as a differentiable value.
  // Only one nesting level is supported: if `output` already depends on a
  // gradient_as_value result this throws NestingUnsupported.
  Value gradient_as_value(Value output, Value wrt);

  // internal: node construction, used by the free-function ops
  struct Node {
    Op op;
    std::vector<int> inputs;
    Eigen::MatrixXd value;
    double scale = 0.0;     // kScale, kAddScalar, kClamp lo
    double scale2 = 0.0;    // kClamp hi
    int i0 = 0, i1 = 0;     // kBroadcast*/kSliceCols/kPadCols geometry
    int grad_level = 0;
  };
  Value push(Node node);
  const Node& node(int id) const { return nodes_.at(id); }

 private:
  // deque: references to node values stay valid while the tape grows
  std::deque<Node> nodes_;
};

// elementwise; operands must have equal shapes, except that a 1x1 operand
// broadcasts against any shape
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value div(Value a, Value b);

Value matmul(Value a, Value b);
Value transpose(Value a);
Value scale(Value a, double c);
Value add_scalar(Value a, double c);
Value neg(Value a);

Value sum(Value a);   // 1x1
Value mean(Value a);  // 1x1
Value rowsum(Value a);  // n x m -> n x 1
Value colsum(Value a);  // n x m -> 1 x m
Value broadcast_rows(Value a, Eigen::Index n);  // 1 x m -> n x m
Value broadcast_cols(Value a, Eigen::Index m);  // n x 1 -> n x m

Value relu(Value a);  // derivative at 0 is 0
Value tanh(Value a);
Value sigmoid(Value a);
Value exp(Value a);
Value log(Value a);  // DomainError unless all entries positive
Value square(Value a);
Value sqrt(Value a);  // DomainError on negative entries
Value abs(Value a);   // derivative at 0 is 0
Value clamp(Value a, double lo, double hi);  // gradient passes strictly inside

Value concat_cols(const std::vector<Value>& parts);
Value slice_cols(Value a, Eigen::Index start, Eigen::Index len);
Value pad_cols(Value a, Eigen::Index total, Eigen::Index start);

Value l2_norm(Value a);       // sqrt(sum(square(a))), 1x1
Value softmax_rows(Value a);  // rowwise softmax

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator-(Value a) { return neg(a); }
inline Value operator*(double c, Value a) { return scale(a, c); }
inline Value operator*(Value a, double c) { return scale(a, c); }

}  // namespace causalgen
