#include "causalgen/causalgan.hpp"

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "causalgen/errors.hpp"

namespace causalgen {

namespace {

constexpr double kLogEps = 1e-7;

Value clamped_log(Value v) { return log(clamp(v, kLogEps, 1.0 - kLogEps)); }

Value one_minus(Value v) { return add_scalar(neg(v), 1.0); }

void check_binary(const Eigen::MatrixXd& m, const char* what) {
  if (((m.array() != 0.0) && (m.array() != 1.0)).any()) {
    throw DomainError(std::string(what) + " entries must be exactly 0 or 1");
  }
}

void check_open_unit(const Eigen::MatrixXd& m, const char* what) {
  if ((m.array() <= 0.0).any() || (m.array() >= 1.0).any()) {
    throw DomainError(std::string(what) +
                      " must lie strictly inside (0, 1); an output hit 0 or 1"
                      " exactly");
  }
}

void check_label_shapes(const Value& outputs, const Eigen::MatrixXd& labels,
                        LabelerVariant variant) {
  if (labels.rows() != outputs.rows()) {
    throw ShapeError("labeler loss: outputs and labels disagree on rows");
  }
  if (labels.cols() < 1) throw ShapeError("labeler loss: no label columns");
  check_binary(labels, "label");
  const Eigen::Index want =
      variant == LabelerVariant::kPerLabel
          ? labels.cols()
          : Eigen::Index(1) << static_cast<int>(labels.cols());
  if (outputs.cols() != want) {
    throw ShapeError("labeler loss: expected " + std::to_string(want) +
                     " output columns, got " + std::to_string(outputs.cols()));
  }
}

// log of the clamped constant targets, entrywise
Eigen::MatrixXd log_clamped_targets(const Eigen::MatrixXd& t) {
  return t.unaryExpr([](double v) {
    return std::log(v >= 0.5 ? 1.0 - kLogEps : kLogEps);
  });
}

// Pointwise log-likelihood term S: rows are samples, one column per label.
// Masked column sums of S recover the two conditional groups.
Value per_label_terms(Value outputs, const Eigen::MatrixXd& labels,
                      bool swapped) {
  Tape& t = *outputs.tape;
  Value mask1 = t.var(labels);
  Value mask0 = t.var(Eigen::MatrixXd(1.0 - labels.array()));
  if (!swapped) {
    return add(mul(mask1, clamped_log(outputs)),
               mul(mask0, clamped_log(one_minus(outputs))));
  }
  // prediction * log(clamped target): the target side is constant, so the
  // surviving gradient is a constant slope of about log(1e-7) per unit of
  // miss.
  return add(mul(outputs, t.var(log_clamped_targets(labels))),
             mul(one_minus(outputs),
                 t.var(log_clamped_targets(Eigen::MatrixXd(
                     1.0 - labels.array())))));
}

// rho_j E[S | l_j=1] + (1-rho_j) E[S | l_j=0] per label, averaged over
// labels and negated. rho defaults to the batch frequency; a group with no
// rows contributes zero.
Value per_label_reduce(Value s, const Eigen::MatrixXd& labels,
                       const Eigen::VectorXd* rho) {
  Tape& t = *s.tape;
  const auto n = static_cast<double>(labels.rows());
  const auto d = labels.cols();
  Eigen::MatrixXd c1(1, d), c0(1, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double n1 = labels.col(j).sum();
    const double n0 = n - n1;
    const double r = rho ? (*rho)(j) : n1 / n;
    c1(0, j) = n1 > 0 ? r / n1 : 0.0;
    c0(0, j) = n0 > 0 ? (1.0 - r) / n0 : 0.0;
  }
  Value pos = mul(colsum(mul(t.var(labels), s)), t.var(c1));
  Value neg_part =
      mul(colsum(mul(t.var(Eigen::MatrixXd(1.0 - labels.array())), s)),
          t.var(c0));
  return neg(scale(sum(add(pos, neg_part)), 1.0 / static_cast<double>(d)));
}

// -(sum_ij w_i S_ij) / d with explicit row weights (an expectation when the
// weights are probabilities).
Value per_label_expect(Value s, const Eigen::VectorXd& w, Eigen::Index d) {
  Tape& t = *s.tape;
  Eigen::MatrixXd wm = w.replicate(1, d);
  return neg(scale(sum(mul(t.var(wm), s)), 1.0 / static_cast<double>(d)));
}

// little-endian pack of a binary label row, bit j = label j (same
// convention as ProbTable combination indices)
Eigen::VectorXi pack_rows(const Eigen::MatrixXd& labels) {
  Eigen::VectorXi idx(labels.rows());
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    int v = 0;
    for (Eigen::Index j = 0; j < labels.cols(); ++j) {
      if (labels(i, j) != 0.0) v |= 1 << static_cast<int>(j);
    }
    idx(i) = v;
  }
  return idx;
}

// 2^d-way cross entropy against the packed label index. weights == nullptr
// means uniform 1/n. Swapped form pairs the softmax row with the log of the
// clamped one-hot target instead.
Value joint_ce(Value outputs, const Eigen::MatrixXd& labels,
               const Eigen::VectorXd* weights, bool swapped) {
  Tape& t = *outputs.tape;
  const Eigen::Index n = labels.rows();
  const Eigen::Index k = outputs.cols();
  const Eigen::VectorXi idx = pack_rows(labels);
  const double unit = 1.0 / static_cast<double>(n);
  if (!swapped) {
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      mask(i, idx(i)) = weights ? (*weights)(i) : unit;
    }
    return neg(sum(mul(t.var(mask), clamped_log(outputs))));
  }
  const double lo = std::log(kLogEps);
  const double hi = std::log(1.0 - kLogEps);
  Eigen::MatrixXd logt = Eigen::MatrixXd::Constant(n, k, lo);
  for (Eigen::Index i = 0; i < n; ++i) logt(i, idx(i)) = hi;
  for (Eigen::Index i = 0; i < n; ++i) {
    logt.row(i) *= weights ? (*weights)(i) : unit;
  }
  return neg(sum(mul(outputs, t.var(logt))));
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

}  // namespace

void validate(const CgTrainConfig& cfg, int label_count) {
  if (label_count < 1) throw DomainError("need at least one label");
  if (cfg.gen_updates < 1) throw DomainError("gen_updates must be positive");
  if (!(cfg.decay_T > 0.0)) throw DomainError("decay_T must be positive");
  if (!(cfg.lr_gen > 0.0) || !(cfg.lr_critic > 0.0)) {
    throw DomainError("learning rates must be positive");
  }
  if (cfg.batch < 1 || cfg.iters < 1 || cfg.trace_every < 1) {
    throw DomainError("batch, iters and trace_every must be positive");
  }
  if (cfg.noise_width < 1) throw DomainError("noise_width must be positive");
  if (cfg.gen_depth < 1 || cfg.disc_depth < 1 || cfg.labeler_depth < 1) {
    throw DomainError("network depths must be positive");
  }
  if (cfg.gen_width < 1 || cfg.disc_width < 1 || cfg.labeler_width < 1) {
    throw DomainError("network widths must be positive");
  }
  if (cfg.variant == LabelerVariant::kJoint && label_count > 4) {
    throw DomainError("joint labeler variant needs 2^d outputs; refused for d > 4");
  }
  if (cfg.variant == LabelerVariant::kJoint && cfg.global_rho) {
    throw DomainError("global_rho applies to the per-label variant only");
  }
}

CausalGan build_causalgan(int feature_width, int label_count,
                          const CgTrainConfig& cfg, RngStream& stream) {
  validate(cfg, label_count);
  if (feature_width < 1) throw DomainError("feature_width must be positive");
  const int lab_out = cfg.variant == LabelerVariant::kPerLabel
                          ? label_count
                          : 1 << label_count;
  const Activation lab_act = cfg.variant == LabelerVariant::kPerLabel
                                 ? Activation::kSigmoid
                                 : Activation::kSoftmax;
  MlpSpec gen_spec{stack_widths(cfg.noise_width + label_count, cfg.gen_depth,
                                cfg.gen_width, feature_width),
                   cfg.gen_hidden, Activation::kIdentity};
  MlpSpec disc_spec{stack_widths(feature_width, cfg.disc_depth, cfg.disc_width,
                                 1),
                    cfg.disc_hidden, Activation::kSigmoid};
  MlpSpec lab_spec{stack_widths(feature_width, cfg.labeler_depth,
                                cfg.labeler_width, lab_out),
                   cfg.labeler_hidden, lab_act};
  CausalGan gan;
  gan.gen = CondGenerator{init_mlp(gen_spec, stream), cfg.noise_width,
                          label_count};
  gan.disc = init_mlp(disc_spec, stream);
  gan.labeler = init_mlp(lab_spec, stream);
  gan.antilabeler = init_mlp(lab_spec, stream);
  gan.variant = cfg.variant;
  return gan;
}

CausalGan build_causalgan(int feature_width, int label_count,
                          const CgTrainConfig& cfg) {
  RngStream stream(cfg.seed, "causalgan/init");
  return build_causalgan(feature_width, label_count, cfg, stream);
}

Eigen::MatrixXd cond_generator_forward(const CondGenerator& gen,
                                       const Eigen::MatrixXd& noise,
                                       const Eigen::MatrixXd& labels) {
  if (noise.cols() != gen.noise_width) {
    throw ShapeError("generator noise width is " +
                     std::to_string(gen.noise_width) + ", got " +
                     std::to_string(noise.cols()));
  }
  if (labels.cols() != gen.label_count) {
    throw ShapeError("generator label count is " +
                     std::to_string(gen.label_count) + ", got " +
                     std::to_string(labels.cols()));
  }
  if (noise.rows() != labels.rows()) {
    throw ShapeError("noise and label batches disagree on rows");
  }
  check_binary(labels, "generator label");
  Eigen::MatrixXd in(noise.rows(), noise.cols() + labels.cols());
  in << noise, labels;
  return forward(gen.net, in);
}

Value labeler_loss(Value outputs, const Eigen::MatrixXd& labels,
                   LabelerVariant variant) {
  check_label_shapes(outputs, labels, variant);
  if (variant == LabelerVariant::kPerLabel) {
    return per_label_reduce(per_label_terms(outputs, labels, false), labels,
                            nullptr);
  }
  return joint_ce(outputs, labels, nullptr, false);
}

Value labeler_loss(Value outputs, const Eigen::MatrixXd& labels,
                   LabelerVariant variant, const Eigen::VectorXd& rho) {
  check_label_shapes(outputs, labels, variant);
  if (variant != LabelerVariant::kPerLabel) {
    throw DomainError("global rho applies to the per-label variant only");
  }
  if (rho.size() != labels.cols()) {
    throw ShapeError("rho needs one entry per label");
  }
  if ((rho.array() < 0.0).any() || (rho.array() > 1.0).any()) {
    throw DomainError("rho entries must lie in [0, 1]");
  }
  return per_label_reduce(per_label_terms(outputs, labels, false), labels,
                          &rho);
}

Value labeler_loss_weighted(Value outputs, const Eigen::MatrixXd& labels,
                            const Eigen::VectorXd& row_weights,
                            LabelerVariant variant) {
  check_label_shapes(outputs, labels, variant);
  if (row_weights.size() != labels.rows()) {
    throw ShapeError("row_weights needs one entry per row");
  }
  if ((row_weights.array() < 0.0).any()) {
    throw DomainError("row_weights must be nonnegative");
  }
  if (variant == LabelerVariant::kPerLabel) {
    return per_label_expect(per_label_terms(outputs, labels, false),
                            row_weights, labels.cols());
  }
  return joint_ce(outputs, labels, &row_weights, false);
}

Value antilabeler_loss(Value outputs, const Eigen::MatrixXd& labels,
                       LabelerVariant variant) {
  return labeler_loss(outputs, labels, variant);
}

Value antilabeler_loss(Value outputs, const Eigen::MatrixXd& labels,
                       LabelerVariant variant, const Eigen::VectorXd& rho) {
  return labeler_loss(outputs, labels, variant, rho);
}

Value discriminator_loss(Value d_real, Value d_fake) {
  if (d_real.cols() != 1 || d_fake.cols() != 1) {
    throw ShapeError("discriminator outputs must be single columns");
  }
  check_open_unit(d_real.val(), "discriminator output");
  check_open_unit(d_fake.val(), "discriminator output");
  Value real_part = mean(clamped_log(d_real));
  Value fake_part =
      mean(sub(clamped_log(one_minus(d_fake)), clamped_log(d_fake)));
  return neg(add(real_part, fake_part));
}

Value generator_gan_term(Value d_fake) {
  if (d_fake.cols() != 1) {
    throw ShapeError("discriminator outputs must be single columns");
  }
  check_open_unit(d_fake.val(), "discriminator output");
  return mean(sub(clamped_log(one_minus(d_fake)), clamped_log(d_fake)));
}

Value generator_label_term(Value outputs, const Eigen::MatrixXd& labels,
                           const CgTrainConfig& cfg) {
  check_label_shapes(outputs, labels, cfg.variant);
  if (cfg.variant == LabelerVariant::kPerLabel) {
    return per_label_reduce(per_label_terms(outputs, labels, cfg.swapped_ce),
                            labels, nullptr);
  }
  return joint_ce(outputs, labels, nullptr, cfg.swapped_ce);
}

double antilabeler_decay(long t, const CgTrainConfig& cfg) {
  if (t < 0) throw DomainError("iteration counter must be nonnegative");
  return std::exp(-static_cast<double>(t) / cfg.decay_T);
}

Value generator_loss(Value d_fake, Value labeler_term, Value antilabeler_term,
                     long t, const CgTrainConfig& cfg) {
  return generator_loss_from_terms(generator_gan_term(d_fake), labeler_term,
                                   antilabeler_term, t, cfg);
}

Value generator_loss_from_terms(Value gan_term, Value labeler_term,
                                Value antilabeler_term, long t,
                                const CgTrainConfig& cfg) {
  if (gan_term.rows() != 1 || gan_term.cols() != 1 ||
      labeler_term.rows() != 1 || labeler_term.cols() != 1 ||
      antilabeler_term.rows() != 1 || antilabeler_term.cols() != 1) {
    throw ShapeError("generator loss terms must be scalars");
  }
  const double coeff = antilabeler_decay(t, cfg);
  return add(gan_term, sub(labeler_term, scale(antilabeler_term, coeff)));
}

MetricTrace train_causalgan(CausalGan& gan, const GraphGenerator& controller,
                            const CgData& data, const CgTrainConfig& cfg) {
  const int d = gan.gen.label_count;
  validate(cfg, d);
  if (gan.variant != cfg.variant) {
    throw SchemaError("config labeler variant disagrees with the built nets");
  }
  const Eigen::Index rows = data.features.rows();
  if (rows < 1) throw DomainError("training data is empty");
  if (data.labels.rows() != rows) {
    throw ShapeError("features and labels disagree on rows");
  }
  const int feature_width = gan.disc.spec.widths.front();
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

  Eigen::VectorXd rho = data.labels.colwise().mean();
  RngStream data_s(cfg.seed, "causalgan/train/data");
  RngStream z1_s(cfg.seed, "causalgan/train/z1");
  RngStream z2_s(cfg.seed, "causalgan/train/z2");

  // DCGAN-style Adam moments for every net
  const AdamConfig crit_opt{cfg.lr_critic, 0.5, 0.999, 1e-8};
  const AdamConfig gen_opt{cfg.lr_gen, 0.5, 0.999, 1e-8};
  auto gen_params = params_of(gan.gen.net);
  auto disc_params = params_of(gan.disc);
  auto lab_params = params_of(gan.labeler);
  auto anti_params = params_of(gan.antilabeler);
  AdamState gen_state = make_adam_state(gen_params);
  AdamState disc_state = make_adam_state(disc_params);
  AdamState lab_state = make_adam_state(lab_params);
  AdamState anti_state = make_adam_state(anti_params);

  const int zw = controller.noise_width;
  auto controller_labels = [&](int m) {
    return round_labels(controller_forward(controller, draw_uniform(z1_s, m, zw)));
  };
  auto generate = [&](const Eigen::MatrixXd& lg) {
    Eigen::MatrixXd z2 = draw_uniform(z2_s, lg.rows(), cfg.noise_width);
    Eigen::MatrixXd in(lg.rows(), cfg.noise_width + d);
    in << z2, lg;
    return in;
  };

  MetricTrace trace;
  trace.columns = {"d_loss", "g_loss", "labeler_loss", "antilabeler_loss",
                   "decay_coeff"};
  double g_loss = 0.0;

  for (int t = 0; t < cfg.iters; ++t) {
    Eigen::MatrixXd xr(cfg.batch, feature_width);
    Eigen::MatrixXd lr(cfg.batch, d);
    for (int i = 0; i < cfg.batch; ++i) {
      const auto r = data_s.uniform_int(rows);
      xr.row(i) = data.features.row(r);
      lr.row(i) = data.labels.row(r);
    }
    Eigen::MatrixXd lg = controller_labels(cfg.batch);
    Eigen::MatrixXd fake = forward(gan.gen.net, generate(lg));

    // one concurrent critic update: all three gradients come from the same
    // snapshot, then all three are applied
    Tape td;
    MlpRef disc_ref = lift(td, gan.disc);
    Value dl = discriminator_loss(forward(disc_ref, td.var(xr)),
                                  forward(disc_ref, td.var(fake)));
    auto disc_grads = td.gradient(dl, params_of(disc_ref));

    Tape tl;
    MlpRef lab_ref = lift(tl, gan.labeler);
    Value lab_out = forward(lab_ref, tl.var(xr));
    Value ll = cfg.global_rho
                   ? labeler_loss(lab_out, lr, cfg.variant, rho)
                   : labeler_loss(lab_out, lr, cfg.variant);
    auto lab_grads = tl.gradient(ll, params_of(lab_ref));

    Tape ta;
    MlpRef anti_ref = lift(ta, gan.antilabeler);
    Value al =
        antilabeler_loss(forward(anti_ref, ta.var(fake)), lg, cfg.variant);
    auto anti_grads = ta.gradient(al, params_of(anti_ref));

    adam_step(disc_params, disc_grads, disc_state, crit_opt);
    adam_step(lab_params, lab_grads, lab_state, crit_opt);
    adam_step(anti_params, anti_grads, anti_state, crit_opt);

    for (int k = 0; k < cfg.gen_updates; ++k) {
      Eigen::MatrixXd lgk = controller_labels(cfg.batch);
      Tape tg;
      MlpRef gen_ref = lift(tg, gan.gen.net);
      Value gen_out = forward(gen_ref, tg.var(generate(lgk)));
      Value d_fake = forward(lift(tg, gan.disc), gen_out);
      Value lab_term =
          generator_label_term(forward(lift(tg, gan.labeler), gen_out), lgk,
                               cfg);
      Value anti_term =
          generator_label_term(forward(lift(tg, gan.antilabeler), gen_out),
                               lgk, cfg);
      Value gl = generator_loss(d_fake, lab_term, anti_term, t, cfg);
      auto gen_grads = tg.gradient(gl, params_of(gen_ref));
      adam_step(gen_params, gen_grads, gen_state, gen_opt);
      g_loss = gl.scalar();
    }

    if (t % cfg.trace_every == 0 || t == cfg.iters - 1) {
      Eigen::VectorXd row(5);
      row << dl.scalar(), g_loss, ll.scalar(), al.scalar(),
          antilabeler_decay(t, cfg);
      trace.append(t, row);
    }
  }
  return trace;
}

JointSamples sample_joint(
    const GraphGenerator& controller, const CondGenerator& gen, int n,
    SampleMode mode,
    const std::vector<std::pair<std::string, double>>& assignment,
    std::uint64_t seed) {
  if (n < 1) throw DomainError("sample_joint needs a positive sample count");
  if (gen.label_count != controller.graph.node_count()) {
    throw SchemaError("generator label count does not match the controller");
  }
  if (mode == SampleMode::kObserve && !assignment.empty()) {
    throw UsageError("observe mode takes no assignment");
  }
  if (mode != SampleMode::kObserve && assignment.empty()) {
    throw UsageError("do and condition modes need an assignment");
  }
  std::map<std::string, double> clamp_map;
  std::vector<std::pair<int, double>> evidence;
  for (const auto& [name, value] : assignment) {
    const int idx = controller.graph.index_of(name);
    if (value != 0.0 && value != 1.0) {
      throw DomainError("assignment values must be 0 or 1");
    }
    if (!clamp_map.emplace(name, value).second) {
      throw UsageError("duplicate assignment for " + name);
    }
    evidence.emplace_back(idx, value);
  }

  RngStream z1_s(seed, "sample/z1");
  RngStream z2_s(seed, "sample/z2");
  const int zw = controller.noise_width;

  Eigen::MatrixXd labels;
  switch (mode) {
    case SampleMode::kObserve:
      labels = round_labels(
          controller_forward(controller, draw_uniform(z1_s, n, zw)));
      break;
    case SampleMode::kDo:
      labels = round_labels(controller_do_forward(
          controller, draw_uniform(z1_s, n, zw), clamp_map));
      break;
    case SampleMode::kCondition: {
      auto sampler = [&](int m) {
        return round_labels(
            controller_forward(controller, draw_uniform(z1_s, m, zw)));
      };
      labels = rejection_condition(sampler, evidence, n).samples;
      break;
    }
  }
  Eigen::MatrixXd features = cond_generator_forward(
      gen, draw_uniform(z2_s, n, gen.noise_width), labels);
  return JointSamples{labels, features};
}

}  // namespace causalgen
