#include "causalgen/causalbegan.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "causalgen/errors.hpp"

namespace causalgen {

namespace {

void check_binary(const Eigen::MatrixXd& m, const char* what) {
  if (((m.array() != 0.0) && (m.array() != 1.0)).any()) {
    throw DomainError(std::string(what) + " entries must be exactly 0 or 1");
  }
}

void check_scalar(const Value& v, const char* what) {
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError(std::string(what) + " must be a scalar");
  }
}

std::vector<int> stack_widths(int in, int depth, int width, int out) {
  std::vector<int> w{in};
  for (int i = 0; i < depth - 1; ++i) w.push_back(width);
  w.push_back(out);
  return w;
}

Eigen::MatrixXd draw_uniform(RngStream& s, Eigen::Index rows,
                             Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = s.uniform(-1.0, 1.0);
  }
  return m;
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Margins compute_margins(double l_real, double l_fake, double lsq_real,
                        double lsq_fake, const MarginState& state) {
  Margins b;
  b.b1 = state.gamma1 * l_real - l_fake;
  b.b2 = state.gamma2 * lsq_real - lsq_fake;
  b.b3 = state.gamma3 * std::max(b.b1, 0.0) - std::max(b.b2, 0.0);
  return b;
}

MarginState update_coeffs(const MarginState& state, double b1, double b2,
                          double b3) {
  MarginState next = state;
  next.c1 = clip01(state.c1 + state.lambda1 * b1);
  next.c2 = clip01(state.c2 + state.lambda2 * b2);
  next.c3 = clip01(state.c3 + state.lambda3 * b3);
  return next;
}

std::pair<Value, Value> began_losses(Value l_real, Value l_fake,
                                     Value lsq_real, Value lsq_fake,
                                     const MarginState& state) {
  check_scalar(l_real, "l_real");
  check_scalar(l_fake, "l_fake");
  check_scalar(lsq_real, "lsq_real");
  check_scalar(lsq_fake, "lsq_fake");
  Value loss_d = add(sub(l_real, scale(l_fake, state.c1)),
                     sub(lsq_real, scale(lsq_fake, state.c2)));
  Value loss_g = add(l_fake, scale(lsq_fake, state.c3));
  return {loss_d, loss_g};
}

double m_complete(double l_real, double b1, double b2, double b3) {
  return l_real + std::abs(b1) + std::abs(b2) + std::abs(b3);
}

AeRef lift(Tape& tape, const AutoencoderDisc& disc) {
  return AeRef{lift(tape, disc.encoder), lift(tape, disc.decoder),
               lift(tape, disc.labeler_head), disc.shared_labeler};
}

Value reconstruction(const AeRef& disc, Value x) {
  return forward(disc.decoder, forward(disc.encoder, x));
}

Eigen::MatrixXd reconstruction(const AutoencoderDisc& disc,
                               const Eigen::MatrixXd& x) {
  return forward(disc.decoder, forward(disc.encoder, x));
}

Value recon_loss(const AeRef& disc, Value x) {
  return mean(abs(sub(x, reconstruction(disc, x))));
}

double recon_loss(const AutoencoderDisc& disc, const Eigen::MatrixXd& x) {
  return (x - reconstruction(disc, x)).array().abs().mean();
}

Value labeler_forward(const AeRef& disc, Value x) {
  return disc.shared_labeler
             ? forward(disc.labeler_head, forward(disc.encoder, x))
             : forward(disc.labeler_head, x);
}

Eigen::MatrixXd labeler_forward(const AutoencoderDisc& disc,
                                const Eigen::MatrixXd& x) {
  return disc.shared_labeler
             ? forward(disc.labeler_head, forward(disc.encoder, x))
             : forward(disc.labeler_head, x);
}

Value label_sq_loss(Value outputs, const Eigen::MatrixXd& labels) {
  if (outputs.rows() != labels.rows() || outputs.cols() != labels.cols()) {
    throw ShapeError("label_sq_loss: outputs and labels disagree on shape");
  }
  check_binary(labels, "label");
  Tape& t = *outputs.tape;
  return mean(square(sub(outputs, t.var(labels))));
}

void validate(const BeganTrainConfig& cfg) {
  for (double g : {cfg.gamma1, cfg.gamma2, cfg.gamma3}) {
    if (!(g >= 0.0) || !(g <= 1.0)) {
      throw DomainError("margin gammas must lie in [0, 1]");
    }
  }
  for (double l : {cfg.lambda1, cfg.lambda2, cfg.lambda3}) {
    if (!(l >= 0.0)) throw DomainError("margin lambdas must be nonnegative");
  }
  if (!(cfg.lr > 0.0)) throw DomainError("learning rate must be positive");
  if (cfg.batch < 1 || cfg.iters < 1 || cfg.trace_every < 1) {
    throw DomainError("batch, iters and trace_every must be positive");
  }
  if (cfg.noise_width < 1) throw DomainError("noise_width must be positive");
  if (cfg.gen_depth < 1 || cfg.enc_depth < 1 || cfg.dec_depth < 1 ||
      cfg.head_depth < 1) {
    throw DomainError("network depths must be positive");
  }
  if (cfg.gen_width < 1 || cfg.enc_width < 1 || cfg.dec_width < 1 ||
      cfg.head_width < 1 || cfg.code_width < 1) {
    throw DomainError("network widths must be positive");
  }
}

CausalBegan build_causalbegan(int feature_width, int label_count,
                              const BeganTrainConfig& cfg, RngStream& stream) {
  validate(cfg);
  if (feature_width < 1) throw DomainError("feature_width must be positive");
  if (label_count < 1) throw DomainError("need at least one label");
  MlpSpec gen_spec{stack_widths(cfg.noise_width + label_count, cfg.gen_depth,
                                cfg.gen_width, feature_width),
                   cfg.gen_hidden, Activation::kIdentity};
  MlpSpec enc_spec{stack_widths(feature_width, cfg.enc_depth, cfg.enc_width,
                                cfg.code_width),
                   cfg.disc_hidden, Activation::kIdentity};
  MlpSpec dec_spec{stack_widths(cfg.code_width, cfg.dec_depth, cfg.dec_width,
                                feature_width),
                   cfg.disc_hidden, Activation::kIdentity};
  MlpSpec head_spec{stack_widths(cfg.shared_labeler ? cfg.code_width
                                                    : feature_width,
                                 cfg.head_depth, cfg.head_width, label_count),
                    cfg.labeler_hidden, Activation::kSigmoid};
  CausalBegan began;
  began.gen = CondGenerator{init_mlp(gen_spec, stream), cfg.noise_width,
                            label_count};
  began.disc.encoder = init_mlp(enc_spec, stream);
  began.disc.decoder = init_mlp(dec_spec, stream);
  began.disc.labeler_head = init_mlp(head_spec, stream);
  began.disc.shared_labeler = cfg.shared_labeler;
  return began;
}

CausalBegan build_causalbegan(int feature_width, int label_count,
                              const BeganTrainConfig& cfg) {
  RngStream stream(cfg.seed, "causalbegan/init");
  return build_causalbegan(feature_width, label_count, cfg, stream);
}

MetricTrace train_causalbegan(CausalBegan& began,
                              const GraphGenerator& controller,
                              const CgData& data,
                              const BeganTrainConfig& cfg) {
  validate(cfg);
  const int d = began.gen.label_count;
  const Eigen::Index rows = data.features.rows();
  if (rows < 1) throw DomainError("training data is empty");
  if (data.labels.rows() != rows) {
    throw ShapeError("features and labels disagree on rows");
  }
  const int feature_width = began.disc.encoder.spec.widths.front();
  if (data.features.cols() != feature_width) {
    throw ShapeError("feature width mismatch with the built networks");
  }
  if (data.labels.cols() != d) {
    throw ShapeError("label count mismatch with the built networks");
  }
  check_binary(data.labels, "training label");
  if (static_cast<int>(data.label_names.size()) != d) {
    throw SchemaError("label_names must name every label column");
  }
  if (data.label_names != controller.graph.nodes()) {
    throw SchemaError(
        "data label order does not match the controller's node order");
  }
  if (began.disc.shared_labeler != cfg.shared_labeler) {
    throw SchemaError("config shared_labeler disagrees with the built nets");
  }

  RngStream data_s(cfg.seed, "causalbegan/train/data");
  RngStream z1_s(cfg.seed, "causalbegan/train/z1");
  RngStream z2_s(cfg.seed, "causalbegan/train/z2");

  const AdamConfig opt{cfg.lr, 0.5, 0.999, 1e-8};
  auto gen_params = params_of(began.gen.net);
  std::vector<Eigen::MatrixXd*> disc_params;
  for (Mlp* net :
       {&began.disc.encoder, &began.disc.decoder, &began.disc.labeler_head}) {
    for (auto* p : params_of(*net)) disc_params.push_back(p);
  }
  AdamState gen_state = make_adam_state(gen_params);
  AdamState disc_state = make_adam_state(disc_params);

  MarginState state;
  state.gamma1 = cfg.gamma1;
  state.gamma2 = cfg.gamma2;
  state.gamma3 = cfg.gamma3;
  state.lambda1 = cfg.lambda1;
  state.lambda2 = cfg.lambda2;
  state.lambda3 = cfg.lambda3;
  if (cfg.fixed_c3) state.c3 = 1.0;

  const int zw = controller.noise_width;

  MetricTrace trace;
  trace.columns = {"L_real", "L_fake", "b1", "b2", "b3",
                   "c1",     "c2",     "c3", "m_complete"};

  for (int t = 0; t < cfg.iters; ++t) {
    Eigen::MatrixXd xr(cfg.batch, feature_width);
    Eigen::MatrixXd lr(cfg.batch, d);
    for (int i = 0; i < cfg.batch; ++i) {
      const auto r = data_s.uniform_int(rows);
      xr.row(i) = data.features.row(r);
      lr.row(i) = data.labels.row(r);
    }
    Eigen::MatrixXd lg = round_labels(
        controller_forward(controller, draw_uniform(z1_s, cfg.batch, zw)));
    Eigen::MatrixXd z2 = draw_uniform(z2_s, cfg.batch, cfg.noise_width);
    Eigen::MatrixXd gen_in(cfg.batch, cfg.noise_width + d);
    gen_in << z2, lg;
    Eigen::MatrixXd fake = forward(began.gen.net, gen_in);

    // discriminator side: generator output enters as a constant
    Tape td;
    AeRef disc_ref = lift(td, began.disc);
    Value xr_d = td.var(xr);
    Value fake_d = td.var(fake);
    Value l_real = recon_loss(disc_ref, xr_d);
    Value l_fake = recon_loss(disc_ref, fake_d);
    Value lsq_real = label_sq_loss(labeler_forward(disc_ref, xr_d), lr);
    Value lsq_fake = label_sq_loss(labeler_forward(disc_ref, fake_d), lg);
    Value loss_d =
        began_losses(l_real, l_fake, lsq_real, lsq_fake, state).first;
    std::vector<Value> disc_refs = params_of(disc_ref.encoder);
    for (const auto& v : params_of(disc_ref.decoder)) disc_refs.push_back(v);
    for (const auto& v : params_of(disc_ref.labeler_head)) {
      disc_refs.push_back(v);
    }
    auto disc_grads = td.gradient(loss_d, disc_refs);

    // generator side, same snapshot and same batch
    Tape tg;
    MlpRef gen_ref = lift(tg, began.gen.net);
    AeRef disc_const = lift(tg, began.disc);
    Value fake_g = forward(gen_ref, tg.var(gen_in));
    Value l_real_g = recon_loss(disc_const, tg.var(xr));
    Value l_fake_g = recon_loss(disc_const, fake_g);
    Value lsq_real_g =
        label_sq_loss(labeler_forward(disc_const, tg.var(xr)), lr);
    Value lsq_fake_g = label_sq_loss(labeler_forward(disc_const, fake_g), lg);
    Value loss_g =
        began_losses(l_real_g, l_fake_g, lsq_real_g, lsq_fake_g, state).second;
    auto gen_grads = tg.gradient(loss_g, params_of(gen_ref));

    adam_step(disc_params, disc_grads, disc_state, opt);
    adam_step(gen_params, gen_grads, gen_state, opt);

    const Margins b = compute_margins(l_real.scalar(), l_fake.scalar(),
                                      lsq_real.scalar(), lsq_fake.scalar(),
                                      state);
    state = update_coeffs(state, b.b1, b.b2, b.b3);
    if (cfg.fixed_c3) state.c3 = 1.0;

    if (t % cfg.trace_every == 0 || t == cfg.iters - 1) {
      Eigen::VectorXd row(9);
      row << l_real.scalar(), l_fake.scalar(), b.b1, b.b2, b.b3, state.c1,
          state.c2, state.c3,
          m_complete(l_real.scalar(), b.b1, b.b2, b.b3);
      trace.append(t, row);
    }
  }
  return trace;
}

}  // namespace causalgen
