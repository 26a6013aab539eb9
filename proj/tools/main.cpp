// causalgen command line: data generation, controller / CausalGAN /
// CausalBEGAN training, sampling under observe / do / condition, TVD
// evaluation and report rendering. Every run writes its outputs plus a
// manifest.json (resolved config and input hashes) into --out; all
// randomness flows from --seed through named sub-streams, so reruns with an
// identical manifest reproduce bit-identical metric CSVs. On failure the
// last stdout line is "ERROR code=<Name> <message>".

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "causalgen/causalbegan.hpp"
#include "causalgen/causalgan.hpp"
#include "causalgen/checkpoint.hpp"
#include "causalgen/controller.hpp"
#include "causalgen/dataset.hpp"
#include "causalgen/errors.hpp"
#include "causalgen/graph.hpp"
#include "causalgen/metrics.hpp"
#include "causalgen/rng.hpp"
#include "causalgen/scm.hpp"
#include "causalgen/scm_io.hpp"
#include "causalgen/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace causalgen;

namespace {

ordered_json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("bad json in " + path + ": " + e.what());
  }
}

void write_json(const std::string& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out.flush()) throw ParseError("write failed: " + path);
}

// Reads known keys out of a config object and rejects leftovers, so a typo
// in a config file fails loudly instead of silently using a default.
class ConfigKeys {
 public:
  explicit ConfigKeys(ordered_json j) : j_(std::move(j)) {
    if (!j_.is_object()) throw SchemaError("config must be a json object");
  }

  template <typename T>
  void take(const char* key, T& field) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      field = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("config key ") + key + ": " + e.what());
    }
    j_.erase(it);
  }

  void take(const char* key, Activation& field) {
    std::string name;
    bool present = j_.contains(key);
    take(key, name);
    if (present) field = activation_from_name(name);
  }

  void take(const char* key, LabelerVariant& field) {
    std::string name;
    bool present = j_.contains(key);
    take(key, name);
    if (!present) return;
    if (name == "per_label") {
      field = LabelerVariant::kPerLabel;
    } else if (name == "joint") {
      field = LabelerVariant::kJoint;
    } else {
      throw SchemaError("labeler variant must be per_label or joint, got " +
                        name);
    }
  }

  void finish() const {
    if (!j_.empty())
      throw SchemaError("unknown config key: " + j_.begin().key());
  }

 private:
  ordered_json j_;
};

ControllerConfig controller_config(const ordered_json& j) {
  ControllerConfig c;
  ConfigKeys k(j);
  k.take("critic_iters", c.critic_iters);
  k.take("lr", c.lr);
  k.take("lambda_gp", c.lambda_gp);
  k.take("batch", c.batch);
  k.take("noise_per_node", c.noise_per_node);
  k.take("gen_depth", c.gen_depth);
  k.take("gen_width", c.gen_width);
  k.take("critic_hidden", c.critic_hidden);
  k.take("critic_width", c.critic_width);
  k.take("gen_updates", c.gen_updates);
  k.take("eval_every", c.eval_every);
  k.take("eval_samples", c.eval_samples);
  k.take("seed", c.seed);
  k.take("gen_hidden", c.gen_hidden);
  k.take("gen_output", c.gen_output);
  k.take("discrete_tvd", c.discrete_tvd);
  k.take("bins", c.bins);
  k.finish();
  return c;
}

ordered_json to_json(const ControllerConfig& c) {
  return ordered_json{{"critic_iters", c.critic_iters},
                      {"lr", c.lr},
                      {"lambda_gp", c.lambda_gp},
                      {"batch", c.batch},
                      {"noise_per_node", c.noise_per_node},
                      {"gen_depth", c.gen_depth},
                      {"gen_width", c.gen_width},
                      {"critic_hidden", c.critic_hidden},
                      {"critic_width", c.critic_width},
                      {"gen_updates", c.gen_updates},
                      {"eval_every", c.eval_every},
                      {"eval_samples", c.eval_samples},
                      {"seed", c.seed},
                      {"gen_hidden", activation_name(c.gen_hidden)},
                      {"gen_output", activation_name(c.gen_output)},
                      {"discrete_tvd", c.discrete_tvd},
                      {"bins", c.bins}};
}

CgTrainConfig causalgan_config(const ordered_json& j) {
  CgTrainConfig c;
  ConfigKeys k(j);
  k.take("gen_updates", c.gen_updates);
  k.take("decay_T", c.decay_T);
  k.take("swapped_ce", c.swapped_ce);
  k.take("variant", c.variant);
  k.take("global_rho", c.global_rho);
  k.take("lr_gen", c.lr_gen);
  k.take("lr_critic", c.lr_critic);
  k.take("batch", c.batch);
  k.take("iters", c.iters);
  k.take("noise_width", c.noise_width);
  k.take("gen_depth", c.gen_depth);
  k.take("gen_width", c.gen_width);
  k.take("disc_depth", c.disc_depth);
  k.take("disc_width", c.disc_width);
  k.take("labeler_depth", c.labeler_depth);
  k.take("labeler_width", c.labeler_width);
  k.take("gen_hidden", c.gen_hidden);
  k.take("disc_hidden", c.disc_hidden);
  k.take("labeler_hidden", c.labeler_hidden);
  k.take("trace_every", c.trace_every);
  k.take("seed", c.seed);
  k.finish();
  return c;
}

ordered_json to_json(const CgTrainConfig& c) {
  return ordered_json{
      {"gen_updates", c.gen_updates},
      {"decay_T", c.decay_T},
      {"swapped_ce", c.swapped_ce},
      {"variant",
       c.variant == LabelerVariant::kPerLabel ? "per_label" : "joint"},
      {"global_rho", c.global_rho},
      {"lr_gen", c.lr_gen},
      {"lr_critic", c.lr_critic},
      {"batch", c.batch},
      {"iters", c.iters},
      {"noise_width", c.noise_width},
      {"gen_depth", c.gen_depth},
      {"gen_width", c.gen_width},
      {"disc_depth", c.disc_depth},
      {"disc_width", c.disc_width},
      {"labeler_depth", c.labeler_depth},
      {"labeler_width", c.labeler_width},
      {"gen_hidden", activation_name(c.gen_hidden)},
      {"disc_hidden", activation_name(c.disc_hidden)},
      {"labeler_hidden", activation_name(c.labeler_hidden)},
      {"trace_every", c.trace_every},
      {"seed", c.seed}};
}

BeganTrainConfig causalbegan_config(const ordered_json& j) {
  BeganTrainConfig c;
  ConfigKeys k(j);
  k.take("gamma1", c.gamma1);
  k.take("gamma2", c.gamma2);
  k.take("gamma3", c.gamma3);
  k.take("lambda1", c.lambda1);
  k.take("lambda2", c.lambda2);
  k.take("lambda3", c.lambda3);
  k.take("lr", c.lr);
  k.take("batch", c.batch);
  k.take("iters", c.iters);
  k.take("noise_width", c.noise_width);
  k.take("gen_depth", c.gen_depth);
  k.take("gen_width", c.gen_width);
  k.take("enc_depth", c.enc_depth);
  k.take("enc_width", c.enc_width);
  k.take("code_width", c.code_width);
  k.take("dec_depth", c.dec_depth);
  k.take("dec_width", c.dec_width);
  k.take("head_depth", c.head_depth);
  k.take("head_width", c.head_width);
  k.take("shared_labeler", c.shared_labeler);
  k.take("fixed_c3", c.fixed_c3);
  k.take("gen_hidden", c.gen_hidden);
  k.take("disc_hidden", c.disc_hidden);
  k.take("labeler_hidden", c.labeler_hidden);
  k.take("trace_every", c.trace_every);
  k.take("seed", c.seed);
  k.finish();
  return c;
}

ordered_json to_json(const BeganTrainConfig& c) {
  return ordered_json{{"gamma1", c.gamma1},
                      {"gamma2", c.gamma2},
                      {"gamma3", c.gamma3},
                      {"lambda1", c.lambda1},
                      {"lambda2", c.lambda2},
                      {"lambda3", c.lambda3},
                      {"lr", c.lr},
                      {"batch", c.batch},
                      {"iters", c.iters},
                      {"noise_width", c.noise_width},
                      {"gen_depth", c.gen_depth},
                      {"gen_width", c.gen_width},
                      {"enc_depth", c.enc_depth},
                      {"enc_width", c.enc_width},
                      {"code_width", c.code_width},
                      {"dec_depth", c.dec_depth},
                      {"dec_width", c.dec_width},
                      {"head_depth", c.head_depth},
                      {"head_width", c.head_width},
                      {"shared_labeler", c.shared_labeler},
                      {"fixed_c3", c.fixed_c3},
                      {"gen_hidden", activation_name(c.gen_hidden)},
                      {"disc_hidden", activation_name(c.disc_hidden)},
                      {"labeler_hidden", activation_name(c.labeler_hidden)},
                      {"trace_every", c.trace_every},
                      {"seed", c.seed}};
}

Eigen::MatrixXd draw_uniform(RngStream& s, Eigen::Index rows,
                             Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = s.uniform(-1.0, 1.0);
  return m;
}

// "A=1,B=0" -> {("A", 1), ("B", 0)}
std::vector<std::pair<std::string, double>> parse_assignment(
    const std::string& spec) {
  const auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
  };
  std::vector<std::pair<std::string, double>> out;
  std::string token;
  std::istringstream stream(spec);
  while (std::getline(stream, token, ',')) {
    const auto eq = token.find('=');
    const std::string name = eq == std::string::npos ? "" : trim(token.substr(0, eq));
    const std::string val = eq == std::string::npos ? "" : trim(token.substr(eq + 1));
    if (name.empty() || (val != "0" && val != "1")) {
      throw UsageError("assignments must look like Name=0 or Name=1, got '" +
                       token + "'");
    }
    out.emplace_back(name, val == "1" ? 1.0 : 0.0);
  }
  if (out.empty()) throw UsageError("empty assignment");
  std::set<std::string> seen;
  for (const auto& [name, value] : out)
    if (!seen.insert(name).second)
      throw UsageError("duplicate assignment for " + name);
  return out;
}

CausalGraph load_graph_arg(const std::string& arg) {
  if (arg == "line" || arg == "collider" || arg == "complete") {
    return synthetic_graph(arg);
  }
  return load_graph(arg);
}

// Selects `names` columns (in that order) from a wider dataset.
LabelDataset select_columns(const LabelDataset& ds,
                            const std::vector<std::string>& names) {
  LabelDataset out;
  out.labels = names;
  out.rows.resize(ds.rows.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto it = std::find(ds.labels.begin(), ds.labels.end(), names[j]);
    if (it == ds.labels.end())
      throw SchemaError("data is missing the label column " + names[j]);
    out.rows.col(static_cast<Eigen::Index>(j)) =
        ds.rows.col(it - ds.labels.begin());
  }
  return out;
}

// CSV keeps its header names; anything else is read as a CelebA attribute
// file. Both paths reorder columns to `names`.
LabelDataset load_label_data(const std::string& path,
                             const std::vector<std::string>& names) {
  if (path.ends_with(".csv")) return select_columns(read_csv(path), names);
  return ingest_celeba_attrs(path, names);
}

// Splits a CSV into the named label columns (that order) and the remaining
// feature columns (file order).
CgData split_features(const LabelDataset& ds,
                      const std::vector<std::string>& names) {
  CgData data;
  data.label_names = names;
  const LabelDataset labels = select_columns(ds, names);
  data.labels = labels.rows;
  std::vector<Eigen::Index> feat;
  for (std::size_t j = 0; j < ds.labels.size(); ++j) {
    if (std::find(names.begin(), names.end(), ds.labels[j]) == names.end())
      feat.push_back(static_cast<Eigen::Index>(j));
  }
  if (feat.empty())
    throw SchemaError("no feature columns besides the labels in the data");
  data.features.resize(ds.rows.rows(), static_cast<Eigen::Index>(feat.size()));
  for (std::size_t j = 0; j < feat.size(); ++j)
    data.features.col(static_cast<Eigen::Index>(j)) = ds.rows.col(feat[j]);
  return data;
}

void save_controller_ckpt(const LabelGenerator& gen,
                          const ordered_json& cfg_json,
                          const std::string& path) {
  Checkpoint ck;
  ck.meta["kind"] = "controller";
  ck.meta["config"] = cfg_json;
  if (const auto* g = std::get_if<GraphGenerator>(&gen)) {
    ck.meta["generator"] = "graph";
    ck.meta["graph"] = serialize(g->graph);
    auto slices = ordered_json::array();
    for (const auto& [b, e] : g->slices) slices.push_back({b, e});
    ck.meta["slices"] = std::move(slices);
    ck.meta["noise_width"] = g->noise_width;
    for (std::size_t i = 0; i < g->nets.size(); ++i)
      add_mlp(ck, "node" + std::to_string(i), g->nets[i]);
  } else {
    ck.meta["generator"] = "fc";
    add_mlp(ck, "net", std::get<FcGenerator>(gen).net);
  }
  save_checkpoint(ck, path);
}

LabelGenerator load_controller_ckpt(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta.value("kind", "") != "controller")
    throw SchemaError(path + " is not a controller checkpoint");
  if (ck.meta.value("generator", "") == "fc") {
    return FcGenerator{read_mlp(ck, "net")};
  }
  GraphGenerator g;
  g.graph = parse_graph(ck.meta.at("graph").get<std::string>());
  for (const auto& s : ck.meta.at("slices"))
    g.slices.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
  g.noise_width = ck.meta.at("noise_width").get<int>();
  for (int i = 0; i < g.graph.node_count(); ++i)
    g.nets.push_back(read_mlp(ck, "node" + std::to_string(i)));
  return g;
}

void save_condgen_ckpt(const std::string& kind, const CondGenerator& gen,
                       const Checkpoint& extra, const ordered_json& cfg_json,
                       const std::string& path) {
  Checkpoint ck = extra;
  ck.meta["kind"] = kind;
  ck.meta["config"] = cfg_json;
  ck.meta["noise_width"] = gen.noise_width;
  ck.meta["label_count"] = gen.label_count;
  add_mlp(ck, "gen", gen.net);
  save_checkpoint(ck, path);
}

CondGenerator load_condgen_ckpt(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  const std::string kind = ck.meta.value("kind", "");
  if (kind != "causalgan" && kind != "causalbegan")
    throw SchemaError(path + " is not a causalgan or causalbegan checkpoint");
  CondGenerator gen;
  gen.net = read_mlp(ck, "gen");
  gen.noise_width = ck.meta.at("noise_width").get<int>();
  gen.label_count = ck.meta.at("label_count").get<int>();
  return gen;
}

struct CommonOpts {
  std::string out = "run";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config;
  long steps = -1;
};

ordered_json finish_run(const std::string& command, const CommonOpts& o,
                        const ordered_json& config,
                        std::vector<std::pair<std::string, std::string>> inputs) {
  ordered_json manifest = make_manifest(command, config, std::move(inputs));
  write_json((fs::path(o.out) / "manifest.json").string(), manifest);
  return manifest;
}

// ---- subcommand bodies ----

struct GenSynOpts : CommonOpts {
  std::string graph;
  int n = 10000;
  bool standin = false;
  bool raw = false;
};

void run_gen_synthetic(const GenSynOpts& o) {
  fs::create_directories(o.out);
  if (o.standin) {
    const Scm scm = celeba_standin_scm();
    save_scm(scm, (fs::path(o.out) / "scm.json").string());
    RngStream stream(o.seed, "cli/gen-synthetic");
    const Eigen::MatrixXd rows = sample(scm, o.n, stream);
    const std::string attrs = (fs::path(o.out) / "attrs.txt").string();
    write_celeba_attrs(attrs, celeba_labels(), rows);
    std::cout << "wrote " << attrs << " (" << o.n << " rows, "
              << celeba_labels().size() << " labels)\n";
    finish_run("gen-synthetic", o,
               {{"kind", "celeba-standin"}, {"n", o.n}, {"seed", o.seed}}, {});
    return;
  }
  if (o.graph.empty())
    throw UsageError("gen-synthetic needs --graph or --celeba-standin");
  const CausalGraph g = load_graph_arg(o.graph);
  const Scm scm = make_cubic_scm(g, o.seed, !o.raw);
  save_scm(scm, (fs::path(o.out) / "scm.json").string());
  RngStream stream(o.seed, "cli/gen-synthetic");
  const Eigen::MatrixXd rows = sample(scm, o.n, stream);
  const std::string samples = (fs::path(o.out) / "samples.csv").string();
  write_csv(samples, g.nodes(), rows);
  std::cout << "wrote " << samples << " (" << o.n << " rows)\n";
  std::vector<std::pair<std::string, std::string>> inputs;
  if (fs::exists(o.graph)) inputs.emplace_back("graph", o.graph);
  finish_run("gen-synthetic", o,
             {{"kind", "cubic"},
              {"graph", o.graph},
              {"n", o.n},
              {"squash", !o.raw},
              {"seed", o.seed}},
             std::move(inputs));
}

struct TrainControllerOpts : CommonOpts {
  std::string data;
  std::string graph;
  std::string generator = "graph";  // graph | fc3 | fc5 | fc10
};

void run_train_controller(const TrainControllerOpts& o) {
  fs::create_directories(o.out);
  ControllerConfig cfg = o.config.empty()
                             ? ControllerConfig{}
                             : controller_config(load_json(o.config));
  if (o.seed_given) cfg.seed = o.seed;
  if (o.steps >= 0) cfg.gen_updates = static_cast<int>(o.steps);

  const CausalGraph g = load_graph_arg(o.graph);
  const LabelDataset data = load_label_data(o.data, g.nodes());
  const int d = g.node_count();

  RngStream init(cfg.seed, "controller/init");
  LabelGenerator gen;
  if (o.generator == "graph") {
    gen = build_graph_generator(g, cfg, init);
  } else if (o.generator == "fc3" || o.generator == "fc5" ||
             o.generator == "fc10") {
    gen = build_fc_baseline(std::stoi(o.generator.substr(2)), d, cfg, init);
  } else {
    throw UsageError("--generator must be graph, fc3, fc5 or fc10");
  }
  Mlp critic = build_critic(d, cfg, init);

  MetricTrace trace = train_controller(gen, critic, data, cfg);
  const std::string metrics = (fs::path(o.out) / "metrics.csv").string();
  trace.save_csv(metrics);
  const ordered_json cfg_json = to_json(cfg);
  save_controller_ckpt(gen, cfg_json,
                       (fs::path(o.out) / "controller.ckpt").string());
  std::cout << "final tvd " << trace.last("tvd") << "\n";
  std::cout << "wrote " << metrics << "\n";

  std::vector<std::pair<std::string, std::string>> inputs{{"data", o.data}};
  if (fs::exists(o.graph)) inputs.emplace_back("graph", o.graph);
  if (!o.config.empty()) inputs.emplace_back("config", o.config);
  finish_run("train-controller", o,
             {{"graph", o.graph},
              {"generator", o.generator},
              {"config", cfg_json}},
             std::move(inputs));
}

struct TrainGanOpts : CommonOpts {
  std::string data;
  std::string controller;
};

GraphGenerator require_graph_controller(const LabelGenerator& gen,
                                        const std::string& what) {
  if (const auto* g = std::get_if<GraphGenerator>(&gen)) return *g;
  throw UsageError(what + " needs a graph controller checkpoint, not an fc baseline");
}

void run_train_causalgan(const TrainGanOpts& o) {
  fs::create_directories(o.out);
  CgTrainConfig cfg =
      o.config.empty() ? CgTrainConfig{} : causalgan_config(load_json(o.config));
  if (o.seed_given) cfg.seed = o.seed;
  if (o.steps >= 0) cfg.iters = static_cast<int>(o.steps);

  const GraphGenerator controller = require_graph_controller(
      load_controller_ckpt(o.controller), "train-causalgan");
  const CgData data =
      split_features(read_csv(o.data), controller.graph.nodes());

  CausalGan gan = build_causalgan(static_cast<int>(data.features.cols()),
                                  controller.graph.node_count(), cfg);
  MetricTrace trace = train_causalgan(gan, controller, data, cfg);
  const std::string metrics = (fs::path(o.out) / "metrics.csv").string();
  trace.save_csv(metrics);

  const ordered_json cfg_json = to_json(cfg);
  Checkpoint extra;
  add_mlp(extra, "disc", gan.disc);
  add_mlp(extra, "labeler", gan.labeler);
  add_mlp(extra, "antilabeler", gan.antilabeler);
  extra.meta["variant"] =
      gan.variant == LabelerVariant::kPerLabel ? "per_label" : "joint";
  save_condgen_ckpt("causalgan", gan.gen, extra, cfg_json,
                    (fs::path(o.out) / "causalgan.ckpt").string());
  std::cout << "final d_loss " << trace.last("d_loss") << "\n";
  std::cout << "wrote " << metrics << "\n";

  std::vector<std::pair<std::string, std::string>> inputs{
      {"data", o.data}, {"controller", o.controller}};
  if (!o.config.empty()) inputs.emplace_back("config", o.config);
  finish_run("train-causalgan", o, {{"config", cfg_json}}, std::move(inputs));
}

void run_train_causalbegan(const TrainGanOpts& o) {
  fs::create_directories(o.out);
  BeganTrainConfig cfg = o.config.empty()
                             ? BeganTrainConfig{}
                             : causalbegan_config(load_json(o.config));
  if (o.seed_given) cfg.seed = o.seed;
  if (o.steps >= 0) cfg.iters = static_cast<int>(o.steps);

  const GraphGenerator controller = require_graph_controller(
      load_controller_ckpt(o.controller), "train-causalbegan");
  const CgData data =
      split_features(read_csv(o.data), controller.graph.nodes());

  CausalBegan began = build_causalbegan(static_cast<int>(data.features.cols()),
                                        controller.graph.node_count(), cfg);
  MetricTrace trace = train_causalbegan(began, controller, data, cfg);
  const std::string metrics = (fs::path(o.out) / "metrics.csv").string();
  trace.save_csv(metrics);

  const ordered_json cfg_json = to_json(cfg);
  Checkpoint extra;
  add_mlp(extra, "encoder", began.disc.encoder);
  add_mlp(extra, "decoder", began.disc.decoder);
  add_mlp(extra, "labeler_head", began.disc.labeler_head);
  extra.meta["shared_labeler"] = began.disc.shared_labeler;
  save_condgen_ckpt("causalbegan", began.gen, extra, cfg_json,
                    (fs::path(o.out) / "causalbegan.ckpt").string());
  std::cout << "final m_complete " << trace.last("m_complete") << "\n";
  std::cout << "wrote " << metrics << "\n";

  std::vector<std::pair<std::string, std::string>> inputs{
      {"data", o.data}, {"controller", o.controller}};
  if (!o.config.empty()) inputs.emplace_back("config", o.config);
  finish_run("train-causalbegan", o, {{"config", cfg_json}},
             std::move(inputs));
}

struct SampleOpts : CommonOpts {
  std::string controller;
  std::string generator;  // optional causalgan/causalbegan checkpoint
  int n = 1000;
  bool observe = false;
  std::string do_spec;
  std::string cond_spec;
};

void run_sample(const SampleOpts& o) {
  fs::create_directories(o.out);
  const int modes =
      (o.observe ? 1 : 0) + (o.do_spec.empty() ? 0 : 1) +
      (o.cond_spec.empty() ? 0 : 1);
  if (modes != 1)
    throw UsageError("sample needs exactly one of --observe, --do, --cond");
  if (o.n < 1) throw UsageError("sample count must be positive");

  SampleMode mode = SampleMode::kObserve;
  std::vector<std::pair<std::string, double>> assignment;
  std::string mode_name = "observe";
  if (!o.do_spec.empty()) {
    mode = SampleMode::kDo;
    assignment = parse_assignment(o.do_spec);
    mode_name = "do";
  } else if (!o.cond_spec.empty()) {
    mode = SampleMode::kCondition;
    assignment = parse_assignment(o.cond_spec);
    mode_name = "cond";
  }

  const LabelGenerator lg = load_controller_ckpt(o.controller);
  const std::string samples = (fs::path(o.out) / "samples.csv").string();

  if (!o.generator.empty()) {
    const GraphGenerator controller = require_graph_controller(lg, "sample");
    const CondGenerator gen = load_condgen_ckpt(o.generator);
    const JointSamples js =
        sample_joint(controller, gen, o.n, mode, assignment, o.seed);
    std::vector<std::string> header = controller.graph.nodes();
    for (Eigen::Index j = 0; j < js.features.cols(); ++j)
      header.push_back("f" + std::to_string(j));
    Eigen::MatrixXd all(js.labels.rows(),
                        js.labels.cols() + js.features.cols());
    all << js.labels, js.features;
    write_csv(samples, header, all);
  } else if (mode == SampleMode::kObserve) {
    RngStream z1(o.seed, "sample/z1");
    const Eigen::MatrixXd labels = round_labels(generator_forward(
        lg, draw_uniform(z1, o.n, generator_noise_width(lg))));
    std::vector<std::string> header;
    if (const auto* g = std::get_if<GraphGenerator>(&lg)) {
      header = g->graph.nodes();
    } else {
      for (Eigen::Index j = 0; j < labels.cols(); ++j)
        header.push_back("L" + std::to_string(j));
    }
    write_csv(samples, header, labels);
  } else {
    const GraphGenerator controller = require_graph_controller(lg, "sample");
    RngStream z1(o.seed, "sample/z1");
    const int zw = controller.noise_width;
    Eigen::MatrixXd labels;
    if (mode == SampleMode::kDo) {
      const std::map<std::string, double> clamp(assignment.begin(),
                                                assignment.end());
      labels = round_labels(controller_do_forward(
          controller, draw_uniform(z1, o.n, zw), clamp));
    } else {
      std::vector<std::pair<int, double>> evidence;
      for (const auto& [name, value] : assignment)
        evidence.emplace_back(controller.graph.index_of(name), value);
      auto sampler = [&](int m) {
        return round_labels(
            controller_forward(controller, draw_uniform(z1, m, zw)));
      };
      labels = rejection_condition(sampler, evidence, o.n).samples;
    }
    write_csv(samples, controller.graph.nodes(), labels);
  }

  std::cout << "wrote " << samples << " (" << o.n << " rows)\n";
  std::vector<std::pair<std::string, std::string>> inputs{
      {"controller", o.controller}};
  if (!o.generator.empty()) inputs.emplace_back("generator", o.generator);
  ordered_json cfg{{"mode", mode_name}, {"n", o.n}, {"seed", o.seed}};
  if (!assignment.empty()) {
    ordered_json a = ordered_json::object();
    for (const auto& [name, value] : assignment) a[name] = value;
    cfg["assignment"] = a;
  }
  finish_run("sample", o, cfg, std::move(inputs));
}

struct EvalTvdOpts : CommonOpts {
  std::string data;
  std::string against;
  std::string labels;  // optional comma list restricting the columns
};

void run_eval_tvd(const EvalTvdOpts& o) {
  fs::create_directories(o.out);
  const LabelDataset a = read_csv(o.data);
  std::vector<std::string> names = a.labels;
  if (!o.labels.empty()) {
    names.clear();
    std::string token;
    std::istringstream stream(o.labels);
    while (std::getline(stream, token, ',')) names.push_back(token);
  }
  const LabelDataset as = select_columns(a, names);
  const LabelDataset bs = select_columns(read_csv(o.against), names);
  const double v =
      tvd(empirical_joint(as.rows, names), empirical_joint(bs.rows, names));
  std::cout << "tvd " << v << "\n";

  MetricTrace trace;
  trace.columns = {"tvd"};
  trace.append(0, Eigen::VectorXd::Constant(1, v));
  trace.save_csv((fs::path(o.out) / "metrics.csv").string());
  finish_run("eval-tvd", o, {{"labels", names}},
             {{"data", o.data}, {"against", o.against}});
}

struct ReportOpts : CommonOpts {
  std::string data;
  std::vector<std::string> pairs;
  std::string trace;
  std::string metric = "tvd";
};

void run_report(const ReportOpts& o) {
  fs::create_directories(o.out);
  if (o.data.empty() && o.trace.empty())
    throw UsageError("report needs --data and/or --trace");
  std::ostringstream text;

  if (!o.data.empty()) {
    const LabelDataset ds = read_csv(o.data);
    const ProbTable joint = empirical_joint(ds.rows, ds.labels);
    const std::vector<double> marginals = marginal_report(joint);
    text << "marginals P(L=1) from " << o.data << "\n";
    text << format_report(ds.labels, {{"P(L=1)", marginals}}) << "\n";
    write_csv((fs::path(o.out) / "marginals.csv").string(), ds.labels,
              Eigen::Map<const Eigen::RowVectorXd>(
                  marginals.data(), static_cast<Eigen::Index>(marginals.size())));

    for (const std::string& pair : o.pairs) {
      const auto comma = pair.find(',');
      if (comma == std::string::npos)
        throw UsageError("--pair wants 'NameA,NameB', got '" + pair + "'");
      const std::string na = pair.substr(0, comma);
      const std::string nb = pair.substr(comma + 1);
      const Eigen::Matrix2d table = pairwise_report(joint, na, nb);
      text << "pairwise (" << na << ", " << nb << ")\n";
      text << format_report({na + "=0", na + "=1"},
                            {{nb + "=0", {table(0, 0), table(1, 0)}},
                             {nb + "=1", {table(0, 1), table(1, 1)}}})
           << "\n";
      write_csv((fs::path(o.out) / ("pairwise_" + na + "_" + nb + ".csv"))
                    .string(),
                {nb + "=0", nb + "=1"}, table);
    }
  }

  if (!o.trace.empty()) {
    const MetricTrace trace = MetricTrace::load_csv(o.trace);
    const Eigen::VectorXd col = trace.column(o.metric);
    MetricTrace out;
    out.columns = {o.metric};
    for (std::size_t i = 0; i < trace.steps.size(); ++i)
      out.append(trace.steps[i], col.segment(static_cast<Eigen::Index>(i), 1));
    const std::string path =
        (fs::path(o.out) / ("trace_" + o.metric + ".csv")).string();
    out.save_csv(path);
    text << "trace " << o.metric << ": " << trace.steps.size()
         << " points, final " << col(col.size() - 1) << "\n";
  }

  const std::string report_path = (fs::path(o.out) / "report.txt").string();
  std::ofstream rout(report_path);
  rout << text.str();
  if (!rout.flush()) throw ParseError("write failed: " + report_path);
  std::cout << text.str();
  std::cout << "wrote " << report_path << "\n";

  std::vector<std::pair<std::string, std::string>> inputs;
  if (!o.data.empty()) inputs.emplace_back("data", o.data);
  if (!o.trace.empty()) inputs.emplace_back("trace", o.trace);
  finish_run("report", o, {{"pairs", o.pairs}, {"metric", o.metric}},
             std::move(inputs));
}

void add_common(CLI::App* sub, CommonOpts& o, bool with_steps = false) {
  sub->add_option("--out", o.out, "output directory")
      ->capture_default_str();
  sub->add_option("--seed", o.seed, "root seed for all sub-streams");
  sub->add_option("--config", o.config, "json config file");
  if (with_steps)
    sub->add_option("--steps", o.steps, "override the training step count");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "causalgen: causal controllers, CausalGAN and CausalBEGAN at desk "
      "scale"};
  app.require_subcommand(1);

  GenSynOpts gen_opts;
  CLI::App* gen = app.add_subcommand(
      "gen-synthetic", "draw a dataset from a random cubic SCM or the "
                       "bundled CelebA stand-in");
  add_common(gen, gen_opts);
  gen->add_option("--graph", gen_opts.graph,
                  "graph file, or line|collider|complete");
  gen->add_option("-n,--samples", gen_opts.n, "rows to draw")
      ->capture_default_str();
  gen->add_flag("--celeba-standin", gen_opts.standin,
                "write a CelebA-format attribute file from the stand-in SCM");
  gen->add_flag("--raw", gen_opts.raw, "skip the tanh squash on cubic nodes");

  TrainControllerOpts tc_opts;
  CLI::App* tc = app.add_subcommand("train-controller",
                                    "train a Causal Controller with WGAN-GP");
  add_common(tc, tc_opts, true);
  tc->add_option("--data", tc_opts.data,
                 "label data: .csv or CelebA attribute file")
      ->required();
  tc->add_option("--graph", tc_opts.graph,
                 "graph file, or line|collider|complete")
      ->required();
  tc->add_option("--generator", tc_opts.generator,
                 "architecture: graph, fc3, fc5 or fc10")
      ->capture_default_str();

  TrainGanOpts cg_opts;
  CLI::App* cg = app.add_subcommand(
      "train-causalgan", "train a CausalGAN on features + labels");
  add_common(cg, cg_opts, true);
  cg->add_option("--data", cg_opts.data,
                 "csv with the controller's label columns plus feature columns")
      ->required();
  cg->add_option("--controller", cg_opts.controller,
                 "trained controller checkpoint")
      ->required();

  TrainGanOpts cb_opts;
  CLI::App* cb = app.add_subcommand(
      "train-causalbegan", "train a CausalBEGAN on features + labels");
  add_common(cb, cb_opts, true);
  cb->add_option("--data", cb_opts.data,
                 "csv with the controller's label columns plus feature columns")
      ->required();
  cb->add_option("--controller", cb_opts.controller,
                 "trained controller checkpoint")
      ->required();

  SampleOpts s_opts;
  CLI::App* sm = app.add_subcommand(
      "sample", "sample labels (and features) under observe / do / condition");
  add_common(sm, s_opts);
  sm->add_option("--controller", s_opts.controller,
                 "trained controller checkpoint")
      ->required();
  sm->add_option("--generator", s_opts.generator,
                 "optional causalgan/causalbegan checkpoint for features");
  sm->add_option("-n,--samples", s_opts.n, "rows to draw")
      ->capture_default_str();
  sm->add_flag("--observe", s_opts.observe, "observational sampling");
  sm->add_option("--do", s_opts.do_spec, "intervention, e.g. \"Male=1\"");
  sm->add_option("--cond", s_opts.cond_spec,
                 "conditioning evidence, e.g. \"Male=1,Young=0\"");

  EvalTvdOpts ev_opts;
  CLI::App* ev = app.add_subcommand(
      "eval-tvd", "total variation distance between two binary sample files");
  add_common(ev, ev_opts);
  ev->add_option("--data", ev_opts.data, "first samples csv")->required();
  ev->add_option("--against", ev_opts.against, "second samples csv")
      ->required();
  ev->add_option("--labels", ev_opts.labels,
                 "comma list restricting the compared columns");

  ReportOpts rp_opts;
  CLI::App* rp = app.add_subcommand(
      "report", "marginal / pairwise tables and trace extracts");
  add_common(rp, rp_opts);
  rp->add_option("--data", rp_opts.data, "binary samples csv");
  rp->add_option("--pair", rp_opts.pairs,
                 "label pair 'NameA,NameB' for a 2x2 table (repeatable)");
  rp->add_option("--trace", rp_opts.trace, "metrics csv from a training run");
  rp->add_option("--metric", rp_opts.metric, "trace column to extract")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // usage text on stderr
    std::cout << "ERROR code=UsageError " << e.what() << std::endl;
    return 2;
  }

  for (auto& [sub, opts] :
       std::vector<std::pair<CLI::App*, CommonOpts*>>{{gen, &gen_opts},
                                                      {tc, &tc_opts},
                                                      {cg, &cg_opts},
                                                      {cb, &cb_opts},
                                                      {sm, &s_opts},
                                                      {ev, &ev_opts},
                                                      {rp, &rp_opts}}) {
    if (app.got_subcommand(sub)) opts->seed_given = sub->count("--seed") > 0;
  }

  try {
    if (app.got_subcommand(gen)) run_gen_synthetic(gen_opts);
    if (app.got_subcommand(tc)) run_train_controller(tc_opts);
    if (app.got_subcommand(cg)) run_train_causalgan(cg_opts);
    if (app.got_subcommand(cb)) run_train_causalbegan(cb_opts);
    if (app.got_subcommand(sm)) run_sample(s_opts);
    if (app.got_subcommand(ev)) run_eval_tvd(ev_opts);
    if (app.got_subcommand(rp)) run_report(rp_opts);
  } catch (const Error& e) {
    std::cout << "ERROR code=" << e.code() << " " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cout << "ERROR code=Internal " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
