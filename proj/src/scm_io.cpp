#include "causalgen/scm_io.hpp"

#include <fstream>

#include "causalgen/errors.hpp"

namespace causalgen {

namespace {

constexpr int kFormatVersion = 1;

Eigen::VectorXd vector_from_json(const nlohmann::json& j,
                                 const std::string& what) {
  if (!j.is_array()) throw SchemaError(what + " must be an array of numbers");
  Eigen::VectorXd v(j.size());
  Eigen::Index i = 0;
  for (const auto& x : j) {
    if (!x.is_number()) throw SchemaError(what + " must contain only numbers");
    v[i++] = x.get<double>();
  }
  return v;
}

}  // namespace

nlohmann::ordered_json scm_to_json(const Scm& scm) {
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["graph"]["nodes"] = scm.graph.nodes();
  auto& edges = j["graph"]["edges"] = nlohmann::ordered_json::array();
  for (const auto& [p, c] : scm.graph.edges())
    edges.push_back({scm.graph.name(p), scm.graph.name(c)});
  auto& mechs = j["mechanisms"] = nlohmann::ordered_json::object();
  auto& exos = j["exogenous"] = nlohmann::ordered_json::object();
  for (int i = 0; i < scm.graph.node_count(); ++i) {
    const auto& name = scm.graph.name(i);
    nlohmann::ordered_json m;
    if (const auto* t = std::get_if<DiscreteTable>(&scm.mechanisms[i])) {
      m["type"] = "discrete_table";
      m["p1"] = std::vector<double>(t->p1.begin(), t->p1.end());
      if (t->invert_exo) m["invert_exo"] = true;
    } else if (const auto* c = std::get_if<CubicPoly>(&scm.mechanisms[i])) {
      m["type"] = "cubic";
      m["coeffs"] = std::vector<double>(c->coeffs.begin(), c->coeffs.end());
      m["squash"] = c->squash;
    } else {
      m["type"] = "constant";
      m["value"] = std::get<ConstantMech>(scm.mechanisms[i]).value;
    }
    mechs[name] = std::move(m);
    nlohmann::ordered_json e;
    if (scm.exogenous[i].dist == ExoDist::Bernoulli) {
      e["dist"] = "bernoulli";
      e["p"] = scm.exogenous[i].p;
    } else {
      e["dist"] = "uniform";
    }
    exos[name] = std::move(e);
  }
  return j;
}

Scm scm_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("SCM document must be an object");
  if (!j.contains("format_version") || !j["format_version"].is_number_integer())
    throw SchemaError("missing integer format_version");
  if (j["format_version"].get<int>() != kFormatVersion)
    throw SchemaError("unsupported format_version " +
                      j["format_version"].dump());
  if (!j.contains("graph") || !j["graph"].is_object())
    throw SchemaError("missing graph object");
  const auto& jg = j["graph"];
  if (!jg.contains("nodes") || !jg["nodes"].is_array())
    throw SchemaError("graph.nodes must be an array");
  std::vector<std::string> nodes;
  for (const auto& n : jg["nodes"]) {
    if (!n.is_string()) throw SchemaError("graph.nodes entries must be strings");
    nodes.push_back(n.get<std::string>());
  }
  std::vector<std::pair<std::string, std::string>> edges;
  if (jg.contains("edges")) {
    if (!jg["edges"].is_array()) throw SchemaError("graph.edges must be an array");
    for (const auto& e : jg["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() ||
          !e[1].is_string())
        throw SchemaError("each edge must be a [parent, child] string pair");
      edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  }
  Scm scm{CausalGraph(nodes, edges), {}, {}};

  if (!j.contains("mechanisms") || !j["mechanisms"].is_object())
    throw SchemaError("missing mechanisms object");
  const auto& jm = j["mechanisms"];
  for (const auto& [name, _] : jm.items())
    if (!scm.graph.has_node(name))
      throw SchemaError("mechanism for unknown node '" + name + "'");
  for (const auto& name : scm.graph.nodes()) {
    if (!jm.contains(name))
      throw SchemaError("node '" + name + "' has no mechanism");
    const auto& m = jm[name];
    if (!m.is_object() || !m.contains("type") || !m["type"].is_string())
      throw SchemaError("mechanism for '" + name + "' needs a string type");
    const std::string type = m["type"].get<std::string>();
    if (type == "discrete_table") {
      if (!m.contains("p1"))
        throw SchemaError("discrete_table for '" + name + "' needs p1");
      DiscreteTable t{vector_from_json(m["p1"], "p1 of '" + name + "'"), false};
      if (m.contains("invert_exo")) {
        if (!m["invert_exo"].is_boolean())
          throw SchemaError("invert_exo must be a boolean");
        t.invert_exo = m["invert_exo"].get<bool>();
      }
      scm.mechanisms.push_back(std::move(t));
    } else if (type == "cubic") {
      if (!m.contains("coeffs"))
        throw SchemaError("cubic mechanism for '" + name + "' needs coeffs");
      CubicPoly c{vector_from_json(m["coeffs"], "coeffs of '" + name + "'"),
                  true};
      if (m.contains("squash")) {
        if (!m["squash"].is_boolean())
          throw SchemaError("squash must be a boolean");
        c.squash = m["squash"].get<bool>();
      }
      scm.mechanisms.push_back(std::move(c));
    } else if (type == "constant") {
      if (!m.contains("value") || !m["value"].is_number())
        throw SchemaError("constant mechanism for '" + name +
                          "' needs a numeric value");
      scm.mechanisms.push_back(ConstantMech{m["value"].get<double>()});
    } else {
      throw UnsupportedMechanism("unknown mechanism type '" + type + "'");
    }
  }

  for (const auto& name : scm.graph.nodes()) {
    Exogenous exo;
    if (j.contains("exogenous") && j["exogenous"].contains(name)) {
      const auto& e = j["exogenous"][name];
      if (!e.is_object() || !e.contains("dist") || !e["dist"].is_string())
        throw SchemaError("exogenous entry for '" + name +
                          "' needs a string dist");
      const std::string dist = e["dist"].get<std::string>();
      if (dist == "uniform") {
        exo.dist = ExoDist::Uniform01;
      } else if (dist == "bernoulli") {
        exo.dist = ExoDist::Bernoulli;
        if (!e.contains("p") || !e["p"].is_number())
          throw SchemaError("bernoulli exogenous for '" + name +
                            "' needs numeric p");
        exo.p = e["p"].get<double>();
      } else {
        throw SchemaError("unknown exogenous dist '" + dist + "'");
      }
    }
    scm.exogenous.push_back(exo);
  }

  validate_scm(scm);
  return scm;
}

Scm load_scm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open SCM file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("invalid JSON in '" + path + "': " + e.what());
  }
  return scm_from_json(j);
}

void save_scm(const Scm& scm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write SCM file '" + path + "'");
  out << scm_to_json(scm).dump(2) << "\n";
}

}  // namespace causalgen
