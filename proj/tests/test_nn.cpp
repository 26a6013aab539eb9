#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "causalgen/checkpoint.hpp"
#include "causalgen/errors.hpp"
#include "causalgen/nn.hpp"
#include "causalgen/rng.hpp"
#include "causalgen/tape.hpp"
#include "fd_check.hpp"

using namespace causalgen;
namespace fs = std::filesystem;
using fdcheck::random_matrix;

namespace {

std::string temp_path(const char* name) {
  return (fs::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void dump(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("widths [2,3] give one 3x2 weight matrix and a 3-wide bias row") {
  auto net = init_mlp(MlpSpec{{2, 3}}, 1, "shape");
  REQUIRE(net.weights.size() == 1);
  REQUIRE(net.biases.size() == 1);
  CHECK(net.weights[0].rows() == 3);
  CHECK(net.weights[0].cols() == 2);
  CHECK(net.biases[0].rows() == 1);
  CHECK(net.biases[0].cols() == 3);
}

TEST_CASE("initial weights stay inside the glorot bound, biases start at zero") {
  auto net = init_mlp(MlpSpec{{2, 3}}, 7, "glorot");
  const double limit = std::sqrt(6.0 / (2 + 3));
  CHECK(net.weights[0].array().abs().maxCoeff() <= limit);
  CHECK(net.weights[0].array().abs().minCoeff() > 0.0);
  CHECK(net.biases[0].isZero(0.0));

  auto again = init_mlp(MlpSpec{{2, 3}}, 7, "glorot");
  CHECK(net.weights[0] == again.weights[0]);
  auto other = init_mlp(MlpSpec{{2, 3}}, 7, "other-name");
  CHECK(net.weights[0] != other.weights[0]);
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(init_mlp(MlpSpec{{4}}, 1, "x"), ShapeError);
  CHECK_THROWS_AS(init_mlp(MlpSpec{{4, 0, 2}}, 1, "x"), ShapeError);
  CHECK_THROWS_AS(activation_from_name("swish"), SchemaError);
  CHECK(activation_from_name(activation_name(Activation::kSoftmax)) ==
        Activation::kSoftmax);
}

TEST_CASE("a hand-filled single layer computes x * W^T + b") {
  Mlp net;
  net.spec = MlpSpec{{2, 2}, Activation::kIdentity, Activation::kIdentity};
  Eigen::MatrixXd w(2, 2);
  w << 1, 2, 3, 4;
  Eigen::MatrixXd b(1, 2);
  b << 0.5, -1.0;
  net.weights = {w};
  net.biases = {b};

  Eigen::MatrixXd x(1, 2);
  x << 1, 1;
  Eigen::MatrixXd y = forward(net, x);
  // row (1,1): [1*1 + 1*2 + 0.5, 1*3 + 1*4 - 1] = [3.5, 6.0]
  CHECK(y(0, 0) == doctest::Approx(3.5));
  CHECK(y(0, 1) == doctest::Approx(6.0));

  CHECK_THROWS_AS(forward(net, Eigen::MatrixXd::Zero(1, 3)), ShapeError);
}

TEST_CASE("tape forward and plain forward agree") {
  RngStream r(11, "fwd-agree");
  for (Activation out : {Activation::kIdentity, Activation::kSigmoid,
                         Activation::kTanh, Activation::kSoftmax}) {
    for (Activation hid : {Activation::kRelu, Activation::kTanh}) {
      auto net = init_mlp(MlpSpec{{3, 5, 4}, hid, out}, 11, "fwd-net");
      Eigen::MatrixXd x = random_matrix(r, 6, 3, -2.0, 2.0);
      Eigen::MatrixXd plain = forward(net, x);

      Tape tape;
      auto ref = lift(tape, net);
      Eigen::MatrixXd taped = forward(ref, tape.var(x)).val();
      CHECK((plain - taped).array().abs().maxCoeff() < 1e-12);

      if (out == Activation::kSoftmax) {
        for (Eigen::Index i = 0; i < plain.rows(); ++i) {
          CHECK(plain.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
          CHECK(plain.row(i).minCoeff() > 0.0);
        }
      }
    }
  }
}

TEST_CASE("finite differences validate gradients through every parameter") {
  MlpSpec spec{{3, 4, 2}, Activation::kTanh, Activation::kSigmoid};
  auto net = init_mlp(spec, 3, "fd-net");
  RngStream r(3, "fd-data");
  Eigen::MatrixXd x = random_matrix(r, 5, 3, -1.5, 1.5);
  Eigen::MatrixXd y = random_matrix(r, 5, 2, 0.1, 0.9);

  fdcheck::BuildFn f = [&spec](Tape& t, const std::vector<Value>& v) {
    MlpRef ref{spec, {v[0], v[2]}, {v[1], v[3]}};
    Value pred = forward(ref, v[4]);
    return mean(square(sub(pred, v[5])));
  };
  std::vector<Eigen::MatrixXd> inputs = {net.weights[0], net.biases[0],
                                         net.weights[1], net.biases[1], x, y};
  CHECK(fdcheck::max_rel_err(f, inputs) < 1e-5);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  auto net = init_mlp(MlpSpec{{2, 3, 1}}, 5, "adam-zero");
  auto before = net;
  auto params = params_of(net);
  auto state = make_adam_state(params);
  std::vector<Eigen::MatrixXd> grads;
  for (auto* p : params) grads.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  adam_step(params, grads, state, AdamConfig{});
  for (std::size_t k = 0; k < net.weights.size(); ++k) {
    CHECK(net.weights[k] == before.weights[k]);
    CHECK(net.biases[k] == before.biases[k]);
  }
}

TEST_CASE("the first adam step moves each entry by about lr") {
  // bias correction makes mhat = g and vhat = g*g on a fresh state, so the
  // update is lr * g / (|g| + eps), magnitude lr for any constant gradient
  Mlp net;
  net.spec = MlpSpec{{1, 2}};
  net.weights = {Eigen::MatrixXd::Zero(2, 1)};
  net.biases = {Eigen::MatrixXd::Zero(1, 2)};
  auto params = params_of(net);
  auto state = make_adam_state(params);
  std::vector<Eigen::MatrixXd> grads = {
      Eigen::MatrixXd::Constant(2, 1, 0.5),
      Eigen::MatrixXd::Constant(1, 2, -3.0)};
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step(params, grads, state, cfg);
  CHECK(net.weights[0](0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(net.weights[0](1, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(net.biases[0](0, 0) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(state.step == 1);

  std::vector<Eigen::MatrixXd> bad = {grads[0]};
  CHECK_THROWS_AS(adam_step(params, bad, state, cfg), ShapeError);
}

TEST_CASE("a small regression net trains to a fraction of its initial loss") {
  RngStream r(17, "train-smoke");
  Eigen::MatrixXd x = random_matrix(r, 24, 2, -1.0, 1.0);
  Eigen::MatrixXd y(24, 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    y(i, 0) = std::sin(2.0 * x(i, 0)) * x(i, 1);

  auto net = init_mlp(MlpSpec{{2, 16, 1}, Activation::kTanh}, 17, "train-net");
  auto params = params_of(net);
  auto state = make_adam_state(params);
  AdamConfig cfg;
  cfg.lr = 0.01;

  double first = 0.0, last = 0.0;
  for (int step = 0; step < 400; ++step) {
    Tape tape;
    auto ref = lift(tape, net);
    Value loss = mean(square(sub(forward(ref, tape.var(x)), tape.var(y))));
    if (step == 0) first = loss.scalar();
    last = loss.scalar();
    auto grads = tape.gradient(loss, params_of(ref));
    adam_step(params, grads, state, cfg);
  }
  CHECK(last < first / 10.0);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  Checkpoint ck;
  ck.meta["note"] = "hello";
  ck.meta["step"] = 7;
  Eigen::MatrixXd m(2, 3);
  m << 1.0 / 3.0, -0.0, 1e-300, M_PI, -7.25, 0.1;
  ck.arrays.emplace_back("m", m);

  auto net = init_mlp(MlpSpec{{3, 5, 2}, Activation::kTanh, Activation::kSigmoid},
                      23, "ckpt-net");
  add_mlp(ck, "gen", net);

  const auto path = temp_path("causalgen_nn_ckpt.bin");
  save_checkpoint(ck, path);
  Checkpoint back = load_checkpoint(path);

  CHECK(back.meta["note"] == "hello");
  CHECK(back.meta["step"] == 7);
  REQUIRE(back.arrays.size() == ck.arrays.size());
  const Eigen::MatrixXd& mb = checkpoint_array(back, "m");
  REQUIRE(mb.rows() == 2);
  REQUIRE(mb.cols() == 3);
  CHECK(std::memcmp(mb.data(), m.data(), sizeof(double) * m.size()) == 0);
  CHECK(std::signbit(mb(0, 1)));

  Mlp net_back = read_mlp(back, "gen");
  CHECK(net_back.spec.widths == net.spec.widths);
  CHECK(net_back.spec.hidden == Activation::kTanh);
  CHECK(net_back.spec.output == Activation::kSigmoid);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    CHECK(net_back.weights[l] == net.weights[l]);
    CHECK(net_back.biases[l] == net.biases[l]);
  }

  CHECK_THROWS_AS(checkpoint_array(back, "missing"), SchemaError);
  CHECK_THROWS_AS(read_mlp(back, "missing"), SchemaError);
  std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoint files are rejected") {
  Checkpoint ck;
  ck.arrays.emplace_back("a", Eigen::MatrixXd::Identity(4, 4));
  const auto path = temp_path("causalgen_nn_ckpt_bad.bin");
  save_checkpoint(ck, path);
  const std::string good = slurp(path);

  std::string wrong_magic = good;
  wrong_magic[0] = 'X';
  dump(path, wrong_magic);
  CHECK_THROWS_AS(load_checkpoint(path), SchemaError);

  dump(path, good.substr(0, good.size() - 9));
  CHECK_THROWS_AS(load_checkpoint(path), SchemaError);

  dump(path, good + "extra");
  CHECK_THROWS_AS(load_checkpoint(path), SchemaError);

  dump(path, good.substr(0, 12));
  CHECK_THROWS_AS(load_checkpoint(path), SchemaError);

  CHECK_THROWS_AS(load_checkpoint(temp_path("causalgen_no_such_file.bin")),
                  ParseError);
  std::remove(path.c_str());
}
