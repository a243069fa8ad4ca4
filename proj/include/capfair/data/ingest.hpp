#pragma once

// Fits a linear additive-noise SCM to tabular data given a causal graph.
//
// DAG file:
//   {"name": "adult", "label": "y",
//    "nodes": [{"name": "sex", "kind": "categorical", "levels": [0, 1]},
//              {"name": "age"},
//              {"name": "hours", "parents": ["sex", "age"]}],
//    "sensitive": ["sex"]}
//
// Nodes may be listed in any order; they are sorted topologically.

#include "capfair/data/csv.hpp"
#include "capfair/scm/io.hpp"

#include <map>

namespace capfair {

struct DagNode {
  std::string name;
  bool categorical = false;
  std::vector<double> levels;
  std::vector<std::string> parents;
};

struct DagSpec {
  std::string name = "fitted";
  std::string label = "y";
  std::vector<DagNode> nodes;
  std::vector<std::string> sensitive;
};

inline DagSpec dag_from_json(const Json& j) {
  DagSpec d;
  try {
    d.name = j.value("name", d.name);
    d.label = j.value("label", d.label);
    for (const auto& jn : j.at("nodes")) {
      DagNode n;
      n.name = jn.at("name").get<std::string>();
      n.categorical = jn.value("kind", std::string("continuous")) == "categorical";
      if (n.categorical) n.levels = jn.value("levels", std::vector<double>{0.0, 1.0});
      n.parents = jn.value("parents", std::vector<std::string>{});
      d.nodes.push_back(std::move(n));
    }
    d.sensitive = j.value("sensitive", std::vector<std::string>{});
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed dag json: ") + e.what());
  }
  return d;
}

// Kahn's algorithm, stable with respect to the declared order.
inline std::vector<DagNode> topological_order(const DagSpec& dag) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
    if (!pos.emplace(dag.nodes[i].name, i).second) throw Error("dag: duplicate node '" + dag.nodes[i].name + "'");
  }
  for (const auto& n : dag.nodes) {
    for (const auto& p : n.parents) {
      if (!pos.count(p)) throw Error("dag: node '" + n.name + "' has unknown parent '" + p + "'");
    }
  }
  std::vector<bool> placed(dag.nodes.size(), false);
  std::vector<DagNode> out;
  while (out.size() < dag.nodes.size()) {
    bool progress = false;
    for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
      if (placed[i]) continue;
      const bool ready = std::all_of(dag.nodes[i].parents.begin(), dag.nodes[i].parents.end(),
                                     [&](const std::string& p) { return placed[pos[p]]; });
      if (ready) {
        placed[i] = true;
        out.push_back(dag.nodes[i]);
        progress = true;
      }
    }
    if (!progress) throw Error("dag: the graph has a cycle");
  }
  return out;
}

struct Fitted {
  ScmSpec scm;
  Dataset data;
};

// Least squares of each continuous node on its parents plus an intercept;
// residual mean and variance become the node's Normal noise. Categorical
// nodes must be roots and get a Bernoulli fitted to the level frequency.
inline Fitted fit_linear_anm(const Dataset& raw, const DagSpec& dag) {
  const auto ordered = topological_order(dag);
  std::vector<std::string> names;
  for (const auto& n : ordered) names.push_back(n.name);
  if (raw.names != names) throw Error("fit: dataset columns do not follow the dag order");
  const Index m = raw.size();
  if (m == 0) throw Error("fit: empty dataset");

  std::vector<NodeSpec> nodes;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const auto& dn = ordered[i];
    const auto row = raw.x.row(static_cast<Index>(i));
    NodeSpec nd;
    nd.name = dn.name;
    for (const auto& p : dn.parents) {
      const auto it = std::find(names.begin(), names.end(), p);
      nd.parents.push_back(static_cast<int>(it - names.begin()));
    }
    if (dn.categorical) {
      if (!dn.parents.empty()) throw Error("fit: categorical node '" + dn.name + "' must be a root");
      if (dn.levels.size() != 2) throw Error("fit: categorical node '" + dn.name + "' needs exactly two levels");
      nd.kind = NodeKind::Categorical;
      nd.levels = dn.levels;
      Index hi = 0;
      for (Index k = 0; k < m; ++k) {
        if (row[k] == dn.levels[1]) {
          ++hi;
        } else if (row[k] != dn.levels[0]) {
          throw Error("fit: column '" + dn.name + "' holds a value outside its declared levels");
        }
      }
      nd.noise = Bernoulli{static_cast<double>(hi) / static_cast<double>(m)};
      nodes.push_back(std::move(nd));
      continue;
    }
    const Index k = static_cast<Index>(nd.parents.size());
    Matrix design(m, k + 1);
    for (Index c = 0; c < k; ++c) design.col(c) = raw.x.row(nd.parents[static_cast<std::size_t>(c)]).transpose();
    design.col(k).setOnes();
    const Vector target = row.transpose();
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < k + 1) {
      throw Error("fit: singular design matrix for node '" + dn.name + "' (parents are collinear or constant)");
    }
    const Vector beta = qr.solve(target);
    const Vector resid = target - design * beta;
    const double mean = resid.mean();
    const double var = std::max((resid.array() - mean).square().mean(), 1e-12);
    nd.mechanism = LinearMechanism{std::vector<double>(beta.data(), beta.data() + k), beta[k]};
    nd.noise = Normal{mean, var};
    nodes.push_back(std::move(nd));
  }
  std::vector<int> sensitive;
  for (const auto& s : dag.sensitive) {
    const auto it = std::find(names.begin(), names.end(), s);
    if (it == names.end()) throw Error("fit: unknown sensitive attribute '" + s + "'");
    sensitive.push_back(static_cast<int>(it - names.begin()));
  }
  return {ScmSpec(dag.name, std::move(nodes), std::move(sensitive)), raw};
}

inline Fitted ingest_csv(const std::string& path, const DagSpec& dag) {
  const auto ordered = topological_order(dag);
  std::vector<std::string> names;
  for (const auto& n : ordered) names.push_back(n.name);
  Dataset d = dataset_from_table(read_csv(path), names, dag.label);
  d.source = path;
  return fit_linear_anm(d, dag);
}

}  // namespace capfair
