#pragma once

// JSON encoding of ScmSpec.
//
//   {"name": "lin",
//    "nodes": [
//      {"name": "S", "kind": "categorical", "levels": [0, 1],
//       "noise": {"dist": "bernoulli", "params": [0.5]}},
//      {"name": "X1", "kind": "continuous", "parents": ["S"],
//       "mechanism": {"linear": {"coefficients": [2], "intercept": 0}},
//       "noise": {"dist": "normal", "params": [0, 1]}},
//      {"name": "X2", "parents": ["S", "X1"], "mechanism": "S - X1^2",
//       "noise": {"dist": "normal", "params": [0, 1]}}],
//    "sensitive": ["S"]}
//
// Optional per-node fields: "link": {"type": "logistic", "offset": c},
// "scale"/"offset" (observed = (raw - offset) / scale), "fixed", "shift".
// Normal params are (mean, variance); Gamma params are (shape, scale).

#include "capfair/scm/scm.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace capfair {

using Json = nlohmann::json;

namespace detail {

inline Json noise_to_json(const NoiseDist& d) {
  return std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          return {{"dist", "bernoulli"}, {"params", {x.p}}};
        } else if constexpr (std::is_same_v<T, Normal>) {
          return {{"dist", "normal"}, {"params", {x.mean, x.variance}}};
        } else {
          return {{"dist", "gamma"}, {"params", {x.shape, x.scale}}};
        }
      },
      d);
}

inline NoiseDist noise_from_json(const Json& j, const std::string& where) {
  const auto dist = j.at("dist").get<std::string>();
  const auto params = j.at("params").get<std::vector<double>>();
  auto need = [&](std::size_t k) {
    if (params.size() != k) throw Error(where + ": noise '" + dist + "' expects " + std::to_string(k) + " params");
  };
  if (dist == "bernoulli") {
    need(1);
    return Bernoulli{params[0]};
  }
  if (dist == "normal") {
    need(2);
    return Normal{params[0], params[1]};
  }
  if (dist == "gamma") {
    need(2);
    return Gamma{params[0], params[1]};
  }
  throw Error(where + ": unknown noise distribution '" + dist + "'");
}

}  // namespace detail

inline Json to_json(const ScmSpec& scm) {
  Json nodes = Json::array();
  for (const auto& nd : scm.nodes()) {
    Json j;
    j["name"] = nd.name;
    j["kind"] = nd.kind == NodeKind::Categorical ? "categorical" : "continuous";
    if (nd.kind == NodeKind::Categorical) j["levels"] = nd.levels;
    Json parents = Json::array();
    for (int p : nd.parents) parents.push_back(scm.node(p).name);
    j["parents"] = parents;
    if (nd.kind == NodeKind::Continuous) {
      if (const auto* lin = std::get_if<LinearMechanism>(&nd.mechanism)) {
        j["mechanism"] = {{"linear", {{"coefficients", lin->coefficients}, {"intercept", lin->intercept}}}};
      } else {
        j["mechanism"] = std::get<ExpressionMechanism>(nd.mechanism).expr.source();
      }
      if (nd.link == Link::Logistic) j["link"] = {{"type", "logistic"}, {"offset", nd.link_offset}};
    }
    j["noise"] = detail::noise_to_json(nd.noise);
    if (nd.scale != 1.0 || nd.offset != 0.0) {
      j["scale"] = nd.scale;
      j["offset"] = nd.offset;
    }
    if (nd.fixed) j["fixed"] = *nd.fixed;
    if (nd.shift != 0.0) j["shift"] = nd.shift;
    nodes.push_back(std::move(j));
  }
  Json sensitive = Json::array();
  for (int s : scm.sensitive()) sensitive.push_back(scm.node(s).name);
  return {{"name", scm.name()}, {"nodes", nodes}, {"sensitive", sensitive}};
}

inline ScmSpec scm_from_json(const Json& j) {
  const std::string name = j.value("name", std::string("scm"));
  std::vector<NodeSpec> nodes;
  auto lookup = [&nodes](const std::string& n) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].name == n) return static_cast<int>(i);
    }
    return -1;
  };
  try {
    for (const auto& jn : j.at("nodes")) {
      NodeSpec nd;
      nd.name = jn.at("name").get<std::string>();
      const std::string where = "scm '" + name + "', node '" + nd.name + "'";
      const auto kind = jn.value("kind", std::string("continuous"));
      if (kind == "categorical") {
        nd.kind = NodeKind::Categorical;
        nd.levels = jn.value("levels", std::vector<double>{0.0, 1.0});
      } else if (kind != "continuous") {
        throw Error(where + ": unknown kind '" + kind + "'");
      }
      if (jn.contains("parents")) {
        for (const auto& p : jn.at("parents")) {
          const int idx = lookup(p.get<std::string>());
          if (idx < 0) {
            throw Error(where + ": parent '" + p.get<std::string>() +
                        "' is unknown or listed later (nodes must be in topological order)");
          }
          nd.parents.push_back(idx);
        }
      }
      if (jn.contains("mechanism") && nd.kind == NodeKind::Continuous) {
        const auto& m = jn.at("mechanism");
        if (m.is_string()) {
          auto e = Expression::parse(m.get<std::string>(), node_resolver(nodes));
          if (!jn.contains("parents")) nd.parents = e.variables();
          nd.mechanism = ExpressionMechanism{std::move(e)};
        } else if (m.contains("linear")) {
          const auto& l = m.at("linear");
          nd.mechanism = LinearMechanism{l.value("coefficients", std::vector<double>{}), l.value("intercept", 0.0)};
        } else {
          throw Error(where + ": mechanism must be an expression string or {\"linear\": ...}");
        }
      }
      if (jn.contains("link")) {
        const auto& l = jn.at("link");
        const auto type = l.value("type", std::string("identity"));
        if (type == "logistic") {
          nd.link = Link::Logistic;
          nd.link_offset = l.value("offset", 0.0);
        } else if (type != "identity") {
          throw Error(where + ": unknown link '" + type + "'");
        }
      }
      if (jn.contains("noise")) {
        nd.noise = detail::noise_from_json(jn.at("noise"), where);
      } else if (nd.kind == NodeKind::Categorical) {
        nd.noise = Bernoulli{0.5};
      }
      nd.scale = jn.value("scale", 1.0);
      nd.offset = jn.value("offset", 0.0);
      if (jn.contains("fixed")) nd.fixed = jn.at("fixed").get<double>();
      nd.shift = jn.value("shift", 0.0);
      nodes.push_back(std::move(nd));
    }
    std::vector<int> sensitive;
    if (j.contains("sensitive")) {
      for (const auto& s : j.at("sensitive")) {
        const int idx = lookup(s.get<std::string>());
        if (idx < 0) throw Error("scm '" + name + "': unknown sensitive attribute '" + s.get<std::string>() + "'");
        sensitive.push_back(idx);
      }
    }
    return ScmSpec(name, std::move(nodes), std::move(sensitive));
  } catch (const Json::exception& e) {
    throw Error("scm '" + name + "': malformed json: " + e.what());
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error("'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace capfair
