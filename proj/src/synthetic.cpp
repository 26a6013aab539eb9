#include "causalgen/synthetic.hpp"

#include "causalgen/errors.hpp"
#include "causalgen/metrics.hpp"
#include "causalgen/scm.hpp"

namespace causalgen {

CausalGraph synthetic_graph(const std::string& name) {
  if (name == "line")
    return CausalGraph({"X", "Y", "Z"}, {{"X", "Y"}, {"Y", "Z"}});
  if (name == "collider")
    return CausalGraph({"X", "Y", "Z"}, {{"X", "Y"}, {"Z", "Y"}});
  if (name == "complete")
    return CausalGraph({"X", "Y", "Z"}, {{"X", "Y"}, {"Y", "Z"}, {"X", "Z"}});
  throw UsageError("unknown synthetic graph '" + name +
                   "' (want line, collider or complete)");
}

SyntheticPanelConfig default_synthetic_config() {
  SyntheticPanelConfig cfg;
  cfg.train.critic_iters = 5;
  cfg.train.lr = 0.0008;
  cfg.train.batch = 128;
  cfg.train.noise_per_node = 3;
  cfg.train.gen_depth = 3;
  cfg.train.gen_width = 16;
  cfg.train.critic_hidden = 3;
  cfg.train.critic_width = 32;
  cfg.train.gen_updates = 800;
  cfg.train.eval_every = 50;
  cfg.train.eval_samples = 8000;
  cfg.train.gen_hidden = Activation::kTanh;
  cfg.train.gen_output = Activation::kTanh;  // cubic data is tanh-squashed
  cfg.train.discrete_tvd = false;
  cfg.train.bins = 10;
  return cfg;
}

namespace {

LabelGenerator build_named_generator(const std::string& name, int d,
                                     const ControllerConfig& cfg,
                                     RngStream& stream) {
  if (name == "fc3" || name == "fc5" || name == "fc10") {
    const int depth = name == "fc3" ? 3 : name == "fc5" ? 5 : 10;
    return build_fc_baseline(depth, d, cfg, stream);
  }
  return build_graph_generator(synthetic_graph(name), cfg, stream);
}

std::uint64_t sub_seed(std::uint64_t master, const std::string& tag) {
  return master ^ fnv1a64(tag);
}

}  // namespace

std::vector<SyntheticRun> run_synthetic_panel(
    const std::string& data_graph, const std::vector<std::string>& generators,
    const SyntheticPanelConfig& cfg) {
  if (cfg.seeds < 1) throw DomainError("need at least one seed");
  if (cfg.n_train < 1 || cfg.n_reference < 1 || cfg.n_eval_final < 1)
    throw DomainError("sample counts must be positive");
  if (generators.empty()) throw UsageError("no generators requested");
  const CausalGraph data_g = synthetic_graph(data_graph);
  const int d = data_g.node_count();

  std::vector<SyntheticRun> out;
  for (const auto& g : generators) out.push_back(SyntheticRun{g, {}, {}, 0.0});

  for (int run = 0; run < cfg.seeds; ++run) {
    const std::string run_tag =
        "synthetic/" + data_graph + "/" + std::to_string(run);
    Scm scm = make_cubic_scm(data_g, sub_seed(cfg.seed, run_tag + "/scm"));
    LabelDataset data;
    data.labels = data_g.nodes();
    data.rows = sample(scm, cfg.n_train, sub_seed(cfg.seed, run_tag + "/train"));
    Eigen::MatrixXd reference =
        sample(scm, cfg.n_reference, sub_seed(cfg.seed, run_tag + "/ref"));
    HistogramSpec hist = histogram_spec(reference, cfg.train.bins);
    Eigen::VectorXd ref_density = histogram_density(reference, hist);

    for (std::size_t gi = 0; gi < generators.size(); ++gi) {
      const std::string gen_tag = run_tag + "/" + generators[gi];
      ControllerConfig train = cfg.train;
      train.seed = sub_seed(cfg.seed, gen_tag + "/train");
      RngStream init(sub_seed(cfg.seed, gen_tag + "/init"), "init");
      LabelGenerator gen =
          build_named_generator(generators[gi], d, train, init);
      Mlp critic = build_critic(d, train, init);
      MetricTrace trace =
          train_controller(gen, critic, data, train, &reference);

      Eigen::VectorXd curve = trace.column("tvd");
      if (out[gi].mean_tvd.size() == 0) {
        out[gi].steps = trace.steps;
        out[gi].mean_tvd = Eigen::VectorXd::Zero(curve.size());
      }
      out[gi].mean_tvd += curve / static_cast<double>(cfg.seeds);

      RngStream final_stream(sub_seed(cfg.seed, gen_tag + "/final"), "final");
      Eigen::MatrixXd z(cfg.n_eval_final, generator_noise_width(gen));
      for (Eigen::Index j = 0; j < z.cols(); ++j)
        for (Eigen::Index i = 0; i < z.rows(); ++i)
          z(i, j) = final_stream.uniform(-1.0, 1.0);
      const double final_tvd =
          tvd(histogram_density(generator_forward(gen, z), hist), ref_density);
      out[gi].final_tvd += final_tvd / static_cast<double>(cfg.seeds);
    }
  }
  return out;
}

}  // namespace causalgen
