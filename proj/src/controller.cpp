#include "causalgen/controller.hpp"

#include <cmath>

#include "causalgen/errors.hpp"

namespace causalgen {

void validate(const ControllerConfig& cfg) {
  const auto positive = [](long v, const char* what) {
    if (v < 1) throw DomainError(std::string(what) + " must be positive");
  };
  positive(cfg.critic_iters, "critic_iters");
  positive(cfg.batch, "batch");
  positive(cfg.noise_per_node, "noise_per_node");
  positive(cfg.gen_depth, "gen_depth");
  positive(cfg.gen_width, "gen_width");
  positive(cfg.critic_hidden, "critic_hidden");
  positive(cfg.critic_width, "critic_width");
  positive(cfg.gen_updates, "gen_updates");
  positive(cfg.eval_every, "eval_every");
  positive(cfg.eval_samples, "eval_samples");
  positive(cfg.bins, "bins");
  if (!(cfg.lr > 0.0)) throw DomainError("lr must be positive");
  if (!(cfg.lambda_gp > 0.0)) throw DomainError("lambda_gp must be positive");
}

namespace {

MlpSpec subnet_spec(int input, int depth, int width, Activation hidden,
                    Activation output, int out_width = 1) {
  MlpSpec spec;
  spec.widths.push_back(input);
  for (int l = 0; l < depth - 1; ++l) spec.widths.push_back(width);
  spec.widths.push_back(out_width);
  spec.hidden = hidden;
  spec.output = output;
  return spec;
}

}  // namespace

GraphGenerator build_graph_generator(const CausalGraph& g,
                                     const ControllerConfig& cfg,
                                     RngStream& stream) {
  validate(cfg);
  GraphGenerator gen;
  gen.graph = g;
  const int d = g.node_count();
  if (d == 0) throw DomainError("generator needs at least one node");
  for (int i = 0; i < d; ++i) {
    const int begin = i * cfg.noise_per_node;
    gen.slices.emplace_back(begin, begin + cfg.noise_per_node);
    const int input =
        static_cast<int>(g.parents(i).size()) + cfg.noise_per_node;
    gen.nets.push_back(init_mlp(subnet_spec(input, cfg.gen_depth,
                                            cfg.gen_width, cfg.gen_hidden,
                                            cfg.gen_output),
                                stream));
  }
  gen.noise_width = d * cfg.noise_per_node;
  return gen;
}

GraphGenerator build_graph_generator(const CausalGraph& g,
                                     const ControllerConfig& cfg) {
  RngStream stream(cfg.seed, "controller/init");
  return build_graph_generator(g, cfg, stream);
}

FcGenerator build_fc_baseline(int depth, int d, const ControllerConfig& cfg,
                              RngStream& stream) {
  validate(cfg);
  if (depth != 3 && depth != 5 && depth != 10)
    throw DomainError("fc baseline depth must be 3, 5 or 10, got " +
                      std::to_string(depth));
  if (d < 1) throw DomainError("need at least one label");
  return FcGenerator{init_mlp(
      subnet_spec(d * cfg.noise_per_node, depth, cfg.gen_width, cfg.gen_hidden,
                  cfg.gen_output, d),
      stream)};
}

Mlp build_critic(int d, const ControllerConfig& cfg, RngStream& stream) {
  validate(cfg);
  MlpSpec spec;
  spec.widths.push_back(d);
  for (int l = 0; l < cfg.critic_hidden; ++l)
    spec.widths.push_back(cfg.critic_width);
  spec.widths.push_back(1);
  spec.hidden = Activation::kRelu;
  spec.output = Activation::kIdentity;
  return init_mlp(spec, stream);
}

Eigen::MatrixXd controller_forward(const GraphGenerator& gen,
                                   const Eigen::MatrixXd& z) {
  return controller_do_forward(gen, z, {});
}

Eigen::MatrixXd controller_do_forward(const GraphGenerator& gen,
                                      const Eigen::MatrixXd& z,
                                      const std::map<std::string, double>& s) {
  if (z.cols() != gen.noise_width)
    throw ShapeError("noise width " + std::to_string(z.cols()) +
                     ", generator expects " +
                     std::to_string(gen.noise_width));
  const int d = gen.graph.node_count();
  std::vector<int> clamped(d, 0);
  Eigen::VectorXd clamp_value(d);
  for (const auto& [name, v] : s) {
    const int i = gen.graph.index_of(name);
    if (!std::isfinite(v))
      throw DomainError("non-finite intervention on " + name);
    clamped[i] = 1;
    clamp_value[i] = v;
  }

  Eigen::MatrixXd out(z.rows(), d);
  for (int i : gen.graph.topological_order()) {
    if (clamped[i]) {
      out.col(i).setConstant(clamp_value[i]);
      continue;
    }
    const auto& pa = gen.graph.parents(i);
    const auto [begin, end] = gen.slices[i];
    Eigen::MatrixXd input(z.rows(),
                          static_cast<Eigen::Index>(pa.size()) + (end - begin));
    Eigen::Index c = 0;
    for (int p : pa) input.col(c++) = out.col(p);
    input.rightCols(end - begin) = z.middleCols(begin, end - begin);
    out.col(i) = forward(gen.nets[i], input);
  }
  return out;
}

int generator_noise_width(const LabelGenerator& gen) {
  if (const auto* g = std::get_if<GraphGenerator>(&gen)) return g->noise_width;
  return std::get<FcGenerator>(gen).net.spec.widths.front();
}

int generator_label_count(const LabelGenerator& gen) {
  if (const auto* g = std::get_if<GraphGenerator>(&gen))
    return g->graph.node_count();
  return std::get<FcGenerator>(gen).net.spec.widths.back();
}

Eigen::MatrixXd generator_forward(const LabelGenerator& gen,
                                  const Eigen::MatrixXd& z) {
  if (const auto* g = std::get_if<GraphGenerator>(&gen))
    return controller_forward(*g, z);
  return forward(std::get<FcGenerator>(gen).net, z);
}

std::vector<Eigen::MatrixXd*> generator_params(LabelGenerator& gen) {
  std::vector<Eigen::MatrixXd*> out;
  if (auto* g = std::get_if<GraphGenerator>(&gen)) {
    for (auto& net : g->nets) {
      auto p = params_of(net);
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }
  return params_of(std::get<FcGenerator>(gen).net);
}

GeneratorRef lift_generator(Tape& tape, const LabelGenerator& gen) {
  GeneratorRef ref;
  if (const auto* g = std::get_if<GraphGenerator>(&gen)) {
    ref.graph_gen = g;
    for (const auto& net : g->nets) ref.nets.push_back(lift(tape, net));
  } else {
    ref.fc_gen = &std::get<FcGenerator>(gen);
    ref.nets.push_back(lift(tape, ref.fc_gen->net));
  }
  return ref;
}

Value generator_forward(const GeneratorRef& ref, Value z) {
  if (ref.fc_gen != nullptr) return forward(ref.nets[0], z);
  const GraphGenerator& gen = *ref.graph_gen;
  if (z.cols() != gen.noise_width)
    throw ShapeError("noise width " + std::to_string(z.cols()) +
                     ", generator expects " +
                     std::to_string(gen.noise_width));
  const int d = gen.graph.node_count();
  std::vector<Value> out(static_cast<std::size_t>(d));
  for (int i : gen.graph.topological_order()) {
    const auto& pa = gen.graph.parents(i);
    const auto [begin, end] = gen.slices[i];
    std::vector<Value> parts;
    parts.reserve(pa.size() + 1);
    for (int p : pa) parts.push_back(out[p]);
    parts.push_back(slice_cols(z, begin, end - begin));
    out[i] = forward(ref.nets[i], concat_cols(parts));
  }
  return concat_cols(out);
}

std::vector<Value> generator_params(const GeneratorRef& ref) {
  std::vector<Value> out;
  for (const auto& net : ref.nets) {
    auto p = params_of(net);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

Eigen::MatrixXd round_labels(const Eigen::MatrixXd& v) {
  if ((v.array() < 0.0).any() || (v.array() > 1.0).any())
    throw DomainError("round_labels expects entries in [0, 1]");
  return (v.array() >= 0.5).cast<double>();
}

Eigen::MatrixXd consistency_probe(const GraphGenerator& gen, int rows,
                                  std::uint64_t seed) {
  if (rows < 1) throw DomainError("probe needs at least one row");
  RngStream stream(seed, "controller/probe");
  Eigen::MatrixXd z(rows, gen.noise_width);
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      z(i, j) = stream.uniform(-1.0, 1.0);

  const int d = gen.graph.node_count();
  Eigen::MatrixXd probe = Eigen::MatrixXd::Zero(d, d);
  LabelGenerator as_variant = gen;  // copy for lifting only
  for (int i = 0; i < d; ++i) {
    Tape tape;
    auto ref = lift_generator(tape, as_variant);
    Value zv = tape.var(z);
    Value labels = generator_forward(ref, zv);
    Value node_sum = sum(slice_cols(labels, i, 1));
    Eigen::MatrixXd dz = tape.gradient(node_sum, {zv})[0];
    for (int j = 0; j < d; ++j) {
      const auto [begin, end] = gen.slices[j];
      probe(i, j) = dz.middleCols(begin, end - begin).cwiseAbs().maxCoeff();
    }
  }
  return probe;
}

bool check_graph_consistency(const GraphGenerator& gen, int rows,
                             std::uint64_t seed) {
  const auto probe = consistency_probe(gen, rows, seed);
  const int d = gen.graph.node_count();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j || gen.graph.is_ancestor(j, i)) continue;
      if (probe(i, j) != 0.0) return false;
    }
  return true;
}

Value gradient_penalty(Tape& tape, const MlpRef& critic, Value real,
                       Value fake, Value eps) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols())
    throw ShapeError("real and fake batches must share a shape");
  if (eps.rows() != real.rows() || eps.cols() != 1)
    throw ShapeError("eps must be a batch x 1 column");
  Value eps_full = broadcast_cols(eps, real.cols());
  Value one_minus = broadcast_cols(add_scalar(neg(eps), 1.0), real.cols());
  Value xhat = add(mul(eps_full, real), mul(one_minus, fake));
  // row scores are independent, so d sum / d xhat holds each row's gradient
  Value score_sum = sum(forward(critic, xhat));
  Value ghat = tape.gradient_as_value(score_sum, xhat);
  Value norms = sqrt(add_scalar(rowsum(square(ghat)), 1e-12));
  return mean(square(add_scalar(norms, -1.0)));
}

MetricTrace train_controller(LabelGenerator& gen, Mlp& critic,
                             const LabelDataset& data,
                             const ControllerConfig& cfg,
                             const Eigen::MatrixXd* tvd_reference) {
  validate(cfg);
  const int d = generator_label_count(gen);
  if (const auto* g = std::get_if<GraphGenerator>(&gen)) {
    if (data.labels != g->graph.nodes())
      throw SchemaError(
          "data columns must match the generator graph's node order");
  } else if (static_cast<int>(data.labels.size()) != d) {
    throw SchemaError("data has " + std::to_string(data.labels.size()) +
                      " columns, generator emits " + std::to_string(d));
  }
  if (data.rows.rows() < 1) throw SchemaError("empty training data");
  if (critic.spec.widths.front() != d)
    throw SchemaError("critic input width does not match the label count");
  const int m = generator_noise_width(gen);

  RngStream data_stream(cfg.seed, "controller/train/data");
  RngStream noise_stream(cfg.seed, "controller/train/noise");
  RngStream eps_stream(cfg.seed, "controller/train/eps");
  RngStream eval_stream(cfg.seed, "controller/train/eval");

  const auto draw_noise = [&](RngStream& stream, int rows) {
    Eigen::MatrixXd z(rows, m);
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        z(i, j) = stream.uniform(-1.0, 1.0);
    return z;
  };
  const auto draw_real = [&](int rows) {
    Eigen::MatrixXd batch(rows, d);
    for (int i = 0; i < rows; ++i)
      batch.row(i) = data.rows.row(static_cast<Eigen::Index>(
          data_stream.uniform_int(static_cast<std::int64_t>(data.rows.rows()))));
    return batch;
  };

  // evaluation targets are fixed up front
  ProbTable data_joint;
  HistogramSpec hist;
  Eigen::VectorXd ref_density;
  const Eigen::MatrixXd& reference =
      tvd_reference != nullptr ? *tvd_reference : data.rows;
  if (cfg.discrete_tvd) {
    data_joint = empirical_joint(reference, data.labels);
  } else {
    hist = histogram_spec(reference, cfg.bins);
    ref_density = histogram_density(reference, hist);
  }
  const auto eval_tvd = [&]() {
    Eigen::MatrixXd z = draw_noise(eval_stream, cfg.eval_samples);
    Eigen::MatrixXd fake = generator_forward(gen, z);
    if (cfg.discrete_tvd)
      return tvd(empirical_joint(round_labels(fake), data.labels), data_joint);
    return tvd(histogram_density(fake, hist), ref_density);
  };

  auto critic_params = params_of(critic);
  auto critic_state = make_adam_state(critic_params);
  auto gen_params_ptrs = generator_params(gen);
  auto gen_state = make_adam_state(gen_params_ptrs);
  AdamConfig adam;
  adam.lr = cfg.lr;
  adam.beta1 = 0.0;
  adam.beta2 = 0.9;

  MetricTrace trace;
  trace.columns = {"wasserstein_estimate", "gradient_penalty", "tvd"};
  double last_w = 0.0, last_gp = 0.0;

  for (int update = 1; update <= cfg.gen_updates; ++update) {
    for (int k = 0; k < cfg.critic_iters; ++k) {
      Eigen::MatrixXd real = draw_real(cfg.batch);
      Eigen::MatrixXd fake = generator_forward(gen, draw_noise(noise_stream, cfg.batch));
      Eigen::MatrixXd eps(cfg.batch, 1);
      for (int i = 0; i < cfg.batch; ++i) eps(i, 0) = eps_stream.uniform();

      Tape tape;
      auto critic_ref = lift(tape, critic);
      Value vr = tape.var(real);
      Value vf = tape.var(fake);
      Value d_real = mean(forward(critic_ref, vr));
      Value d_fake = mean(forward(critic_ref, vf));
      Value pen = gradient_penalty(tape, critic_ref, vr, vf, tape.var(eps));
      Value loss = add(sub(d_fake, d_real), scale(pen, cfg.lambda_gp));
      auto grads = tape.gradient(loss, params_of(critic_ref));
      adam_step(critic_params, grads, critic_state, adam);
      last_w = d_real.scalar() - d_fake.scalar();
      last_gp = pen.scalar();
    }

    {
      Tape tape;
      auto gen_ref = lift_generator(tape, gen);
      auto critic_ref = lift(tape, critic);
      Value z = tape.var(draw_noise(noise_stream, cfg.batch));
      Value fake = generator_forward(gen_ref, z);
      Value loss = neg(mean(forward(critic_ref, fake)));
      auto grads = tape.gradient(loss, generator_params(gen_ref));
      adam_step(gen_params_ptrs, grads, gen_state, adam);
    }

    if (update % cfg.eval_every == 0 || update == cfg.gen_updates) {
      trace.append(update, (Eigen::VectorXd(3) << last_w, last_gp,
                            eval_tvd()).finished());
    }
  }
  return trace;
}

}  // namespace causalgen
