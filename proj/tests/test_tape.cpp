#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "causalgen/errors.hpp"
#include "causalgen/rng.hpp"
#include "causalgen/tape.hpp"
#include "fd_check.hpp"

using namespace causalgen;
using fdcheck::max_rel_err;
using fdcheck::random_matrix;

namespace {

Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = rows.size();
  const auto c = rows.begin()->size();
  Eigen::MatrixXd m(r, c);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("forward values of the nonlinearities") {
  Tape t;
  auto x = t.var(mat({{-2.0, 0.0, 3.0}}));
  CHECK(relu(x).val()(0, 0) == 0.0);
  CHECK(relu(x).val()(0, 1) == 0.0);
  CHECK(relu(x).val()(0, 2) == 3.0);
  CHECK(sigmoid(t.var(0.0)).scalar() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(causalgen::tanh(t.var(0.0)).scalar() == 0.0);
  CHECK(l2_norm(t.var(mat({{3.0, 4.0}}))).scalar() ==
        doctest::Approx(5.0).epsilon(1e-12));
  CHECK(mean(t.var(mat({{1.0, 2.0}, {3.0, 6.0}}))).scalar() ==
        doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("gradient of x squared at 3 is 6") {
  Tape t;
  auto x = t.var(3.0);
  auto y = square(x);
  auto g = t.gradient(y, {x});
  CHECK(g[0](0, 0) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("gradients are linear to machine precision") {
  Tape t;
  auto a = t.var(mat({{1.0, -2.0}, {0.5, 4.0}}));
  auto b = t.var(mat({{2.0, 1.0}, {-1.0, 3.0}}));
  auto y = sum(add(scale(a, 2.0), scale(b, 3.0)));
  auto g = t.gradient(y, {a, b});
  CHECK((g[0].array() - 2.0).abs().maxCoeff() < 1e-9);
  CHECK((g[1].array() - 3.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("inputs the output does not touch get zero gradients") {
  Tape t;
  auto a = t.var(mat({{1.0, 2.0}}));
  auto b = t.var(mat({{5.0, 6.0}}));
  auto y = sum(square(a));
  auto g = t.gradient(y, {a, b});
  CHECK(g[1].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("every primitive passes a finite-difference check") {
  RngStream r(404, "fd");
  auto A = random_matrix(r, 3, 4, -1.5, 1.5);
  auto B = random_matrix(r, 3, 4, 0.3, 1.8);   // positive: log, sqrt, div
  auto C = random_matrix(r, 4, 2, -1.0, 1.0);
  auto S = random_matrix(r, 1, 1, 0.2, 0.9);
  auto Col = random_matrix(r, 3, 1, -1.0, 1.0);
  auto Row = random_matrix(r, 1, 4, -1.0, 1.0);

  auto fd = [&](fdcheck::BuildFn f, std::vector<Eigen::MatrixXd> ins) {
    CHECK(max_rel_err(f, std::move(ins)) < 1e-6);
  };

  fd([](Tape&, const std::vector<Value>& v) { return sum(add(v[0], v[1])); },
     {A, B});
  fd([](Tape&, const std::vector<Value>& v) { return sum(sub(v[0], v[1])); },
     {A, B});
  fd([](Tape&, const std::vector<Value>& v) { return sum(mul(v[0], v[1])); },
     {A, B});
  fd([](Tape&, const std::vector<Value>& v) { return sum(div(v[0], v[1])); },
     {A, B});
  fd([](Tape&, const std::vector<Value>& v) {
       return sum(square(matmul(v[0], v[1])));
     },
     {A, C});
  fd([](Tape&, const std::vector<Value>& v) {
       return sum(square(transpose(v[0])));
     },
     {A});
  fd([](Tape&, const std::vector<Value>& v) { return sum(scale(v[0], -2.5)); },
     {A});
  fd([](Tape&, const std::vector<Value>& v) {
       return sum(square(add_scalar(v[0], 0.7)));
     },
     {A});
  fd([](Tape&, const std::vector<Value>& v) { return square(sum(v[0])); }, {A});
  fd([](Tape&, const std::vector<Value>& v) { return square(mean(v[0])); },
     {A});
  fd([](Tape&, const std::vector<Value>& v) { return sum(square(rowsum(v[0]))); },
     {A});
  fd([](Tape&, const std::vector<Value>& v) { return sum(square(colsum(v[0]))); },
     {A});
  fd([](Tape&, const std::vector<Value>& v) {
       return sum(mul(broadcast_rows(v[0], 3), v[1]));
     },
     {Row, A});
  fd([](Tape&, const std::vector<Value>& v) {
       return sum(mul(broadcast_cols(v[0], 4), v[1]));
     },
     {Col, A});
  fd([](Tape&, const std::vector<Value>& v) { return sum(relu(v[0])); }, {A});
  fd([](Tape&, const std::vector<Value>& v) { return sum(causalgen::tanh(v[0])); },
     {A});
  fd([](Tape&, const std::vector<Value>& v) { return sum(sigmoid(v[0])); },
     {A});
  fd([](Tape&, const std::vector<Value>& v) { return sum(causalgen::exp(v[0])); },
     {A});
  fd([](Tape&, const std::vector<Value>& v) { return sum(causalgen::log(v[0])); },
     {B});
  fd([](Tape&, const std::vector<Value>& v) { return sum(square(v[0])); }, {A});
  fd([](Tape&, const std::vector<Value>& v) { return sum(causalgen::sqrt(v[0])); },
     {B});
  fd([](Tape&, const std::vector<Value>& v) { return sum(causalgen::abs(v[0])); },
     {A});
  fd([](Tape&, const std::vector<Value>& v) {
       return sum(clamp(v[0], -0.9, 0.9));
     },
     {A});
  fd([](Tape&, const std::vector<Value>& v) {
       return sum(square(concat_cols({v[0], v[1]})));
     },
     {A, B});
  fd([](Tape&, const std::vector<Value>& v) {
       return sum(square(slice_cols(v[0], 1, 2)));
     },
     {A});
  fd([](Tape&, const std::vector<Value>& v) {
       return sum(square(pad_cols(v[0], 7, 2)));
     },
     {A});
  fd([](Tape&, const std::vector<Value>& v) { return l2_norm(v[0]); }, {A});
  fd([](Tape&, const std::vector<Value>& v) {
       return sum(square(softmax_rows(v[0])));
     },
     {A});
  // scalar broadcast in the elementwise ops
  fd([](Tape&, const std::vector<Value>& v) { return sum(mul(v[0], v[1])); },
     {S, A});
  fd([](Tape&, const std::vector<Value>& v) { return sum(div(v[0], v[1])); },
     {A, S});
  fd([](Tape&, const std::vector<Value>& v) { return sum(add(v[0], v[1])); },
     {S, A});
}

TEST_CASE("chain rule through an mlp-shaped composition") {
  RngStream r(11, "mlp-fd");
  auto X = random_matrix(r, 4, 3, -1.0, 1.0);
  auto W1 = random_matrix(r, 3, 5, -0.8, 0.8);
  auto b1 = random_matrix(r, 1, 5, -0.2, 0.2);
  auto W2 = random_matrix(r, 5, 1, -0.8, 0.8);
  auto f = [](Tape&, const std::vector<Value>& v) {
    auto h = causalgen::tanh(
        add(matmul(v[0], v[1]), broadcast_rows(v[2], v[0].rows())));
    return mean(sigmoid(matmul(h, v[3])));
  };
  CHECK(max_rel_err(f, {X, W1, b1, W2}) < 1e-6);
}

TEST_CASE("relu and abs take the zero branch at the kink") {
  Tape t;
  auto x = t.var(mat({{0.0}}));
  CHECK(t.gradient(sum(relu(x)), {x})[0](0, 0) == 0.0);
  CHECK(t.gradient(sum(causalgen::abs(x)), {x})[0](0, 0) == 0.0);
}

TEST_CASE("clamp gradient passes inside and blocks outside") {
  Tape t;
  auto x = t.var(mat({{0.5, 2.0, -3.0}}));
  auto g = t.gradient(sum(clamp(x, -1.0, 1.0)), {x});
  CHECK(g[0](0, 0) == 1.0);
  CHECK(g[0](0, 1) == 0.0);
  CHECK(g[0](0, 2) == 0.0);
}

TEST_CASE("softmax rows sum to one") {
  Tape t;
  auto x = t.var(mat({{1.0, 2.0, 3.0}, {-40.0, 0.0, 55.0}}));
  auto s = softmax_rows(x);
  CHECK(s.val().row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.val().row(1).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.val().minCoeff() >= 0.0);
}

TEST_CASE("second order: penalty of an identity-gradient critic") {
  // D(x) = sum(x^2)/2 has input gradient x, so the unit-norm penalty becomes
  // (|x| - 1)^2 with gradient 2(|x| - 1) x / |x|.
  auto run = [](const Eigen::MatrixXd& xv, Eigen::MatrixXd& grad_out) {
    Tape t;
    auto x = t.var(xv);
    auto d = scale(sum(square(x)), 0.5);
    auto ghat = t.gradient_as_value(d, x);
    auto pen = square(add_scalar(l2_norm(ghat), -1.0));
    grad_out = t.gradient(pen, {x})[0];
    return pen.scalar();
  };
  Eigen::MatrixXd g;
  CHECK(run(mat({{3.0, 4.0}}), g) == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(g(0, 0) == doctest::Approx(4.8).epsilon(1e-9));
  CHECK(g(0, 1) == doctest::Approx(6.4).epsilon(1e-9));
  CHECK(run(mat({{0.6, 0.8}}), g) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("second order: linear critic penalty only sees the weights") {
  // D(x) = x w^T gives input gradient w everywhere, so the penalty is
  // (|w| - 1)^2: value 4 at |w| = 3, parameter gradient 2(|w|-1) w / |w|.
  Tape t;
  auto x = t.var(mat({{0.3, -1.2, 0.7}}));
  auto w = t.var(mat({{3.0, 0.0, 0.0}}));
  auto d = sum(mul(x, w));
  auto ghat = t.gradient_as_value(d, x);
  auto pen = square(add_scalar(l2_norm(ghat), -1.0));
  CHECK(pen.scalar() == doctest::Approx(4.0).epsilon(1e-12));
  auto grads = t.gradient(pen, {w, x});
  CHECK(grads[0](0, 0) == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(grads[0](0, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(grads[0](0, 2) == doctest::Approx(0.0).epsilon(1e-9));
  // the penalty does not depend on where it was evaluated
  CHECK(grads[1].cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("second order matches finite differences of the first gradient") {
  RngStream r(21, "second-fd");
  auto X = random_matrix(r, 2, 3, -1.0, 1.0);
  auto W = random_matrix(r, 3, 4, -0.8, 0.8);
  auto V = random_matrix(r, 4, 1, -0.8, 0.8);

  // scalar second-order quantity: penalty(W, V at fixed X)
  auto penalty = [&X](const Eigen::MatrixXd& Wv, const Eigen::MatrixXd& Vv,
                      Eigen::MatrixXd* gW, Eigen::MatrixXd* gV) {
    Tape t;
    auto x = t.var(X);
    auto w = t.var(Wv);
    auto v = t.var(Vv);
    auto d = sum(causalgen::tanh(matmul(causalgen::tanh(matmul(x, w)), v)));
    auto ghat = t.gradient_as_value(d, x);
    auto pen = mean(square(add_scalar(causalgen::sqrt(rowsum(square(ghat))),
                                      -1.0)));
    if (gW || gV) {
      auto gs = t.gradient(pen, {w, v});
      if (gW) *gW = gs[0];
      if (gV) *gV = gs[1];
    }
    return pen.scalar();
  };

  Eigen::MatrixXd gW, gV;
  penalty(W, V, &gW, &gV);
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < W.cols(); ++j)
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      Eigen::MatrixXd up = W, down = W;
      up(i, j) += h;
      down(i, j) -= h;
      const double fd =
          (penalty(up, V, nullptr, nullptr) - penalty(down, V, nullptr, nullptr)) /
          (2 * h);
      const double scale = std::max({1.0, std::abs(fd), std::abs(gW(i, j))});
      worst = std::max(worst, std::abs(fd - gW(i, j)) / scale);
    }
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    Eigen::MatrixXd up = V, down = V;
    up(i, 0) += h;
    down(i, 0) -= h;
    const double fd =
        (penalty(W, up, nullptr, nullptr) - penalty(W, down, nullptr, nullptr)) /
        (2 * h);
    const double scale = std::max({1.0, std::abs(fd), std::abs(gV(i, 0))});
    worst = std::max(worst, std::abs(fd - gV(i, 0)) / scale);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("a second nesting level is rejected") {
  Tape t;
  auto x = t.var(mat({{1.0, 2.0}}));
  auto ghat = t.gradient_as_value(sum(square(x)), x);
  auto expr = sum(square(ghat));
  CHECK_THROWS_AS(t.gradient_as_value(expr, x), NestingUnsupported);
  // the plain second differentiation is the supported path
  auto g = t.gradient(expr, {x});
  CHECK(g[0](0, 0) == doctest::Approx(8.0).epsilon(1e-9));  // d/dx sum(4x^2)
}

TEST_CASE("gradient_as_value of a detached input is a zero value") {
  Tape t;
  auto x = t.var(mat({{1.0}}));
  auto y = t.var(mat({{2.0, 5.0}}));
  auto ghat = t.gradient_as_value(square(x), y);
  CHECK(ghat.val().cwiseAbs().maxCoeff() == 0.0);
  CHECK(ghat.rows() == 1);
  CHECK(ghat.cols() == 2);
}

TEST_CASE("identical tapes produce bit-identical gradients") {
  auto build = [] {
    Tape t;
    auto x = t.var(mat({{0.3, -0.7}, {1.1, 0.2}}));
    auto w = t.var(mat({{0.5}, {-0.25}}));
    auto out = mean(sigmoid(matmul(causalgen::tanh(x), w)));
    return t.gradient(out, {x, w});
  };
  auto a = build();
  auto b = build();
  for (std::size_t k = 0; k < a.size(); ++k)
    CHECK((a[k] - b[k]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shape and domain violations are trapped at op boundaries") {
  Tape t;
  auto a = t.var(mat({{1.0, 2.0}}));
  auto b = t.var(mat({{1.0, 2.0, 3.0}}));
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(causalgen::log(t.var(mat({{0.0}}))), DomainError);
  CHECK_THROWS_AS(causalgen::log(t.var(mat({{-1.0}}))), DomainError);
  CHECK_THROWS_AS(causalgen::sqrt(t.var(mat({{-0.5}}))), DomainError);
  CHECK_THROWS_AS(div(a, t.var(mat({{0.0, 1.0}}))), DomainError);
  CHECK_THROWS_AS(t.gradient(a, {a}), ShapeError);  // non-scalar output
  CHECK_THROWS_AS(broadcast_rows(t.var(mat({{1.0}, {2.0}})), 3), ShapeError);
  CHECK_THROWS_AS(slice_cols(a, 1, 5), ShapeError);
  Tape other;
  auto c = other.var(1.0);
  CHECK_THROWS_AS(add(a, c), ShapeError);
}

TEST_CASE("forward on tape matches plain eigen arithmetic") {
  RngStream r(88, "fwd");
  auto X = random_matrix(r, 5, 3, -2.0, 2.0);
  auto W = random_matrix(r, 3, 4, -1.0, 1.0);
  Tape t;
  auto tx = t.var(X);
  auto tw = t.var(W);
  Eigen::MatrixXd expect = (X * W).array().tanh().matrix();
  CHECK((causalgen::tanh(matmul(tx, tw)).val() - expect).cwiseAbs().maxCoeff() <
        1e-15);
}
