#pragma once

// Named synthetic SCMs together with their label rules and the classifier
// family used for them in the benchmark.

#include "capfair/scm/scm.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace capfair {

struct SyntheticModel {
  ScmSpec scm;
  std::string label_rule;  // expression over raw node values giving P(Y = 1)
  std::string classifier;  // "glm" or "mlp"
};

namespace builtin {

inline NodeSpec binary_root(std::string name, double p = 0.5) {
  NodeSpec n;
  n.name = std::move(name);
  n.kind = NodeKind::Categorical;
  n.levels = {0.0, 1.0};
  n.noise = Bernoulli{p};
  return n;
}

inline NodeSpec linear_node(std::string name, std::vector<int> parents, std::vector<double> coefficients,
                            double intercept, NoiseDist noise) {
  NodeSpec n;
  n.name = std::move(name);
  n.parents = std::move(parents);
  n.mechanism = LinearMechanism{std::move(coefficients), intercept};
  n.noise = noise;
  return n;
}

// Parents are inferred from the identifiers the expression references.
inline NodeSpec expression_node(const std::vector<NodeSpec>& previous, std::string name, std::string expr,
                                NoiseDist noise) {
  NodeSpec n;
  n.name = std::move(name);
  auto e = Expression::parse(std::move(expr), node_resolver(previous));
  n.parents = e.variables();
  n.mechanism = ExpressionMechanism{std::move(e)};
  n.noise = noise;
  return n;
}

// S := U_S, X1 := 2S + U1, X2 := S - X1 + U2.
inline ScmSpec lin() {
  std::vector<NodeSpec> nodes;
  nodes.push_back(binary_root("S"));
  nodes.push_back(linear_node("X1", {0}, {2.0}, 0.0, Normal{0.0, 1.0}));
  nodes.push_back(linear_node("X2", {0, 1}, {1.0, -1.0}, 0.0, Normal{0.0, 1.0}));
  return ScmSpec("lin", std::move(nodes), {0});
}

// S := U_S, X1 := 2S^2 + U1, X2 := S - X1^2 + U2.
inline ScmSpec nlm() {
  std::vector<NodeSpec> nodes;
  nodes.push_back(binary_root("S"));
  nodes.push_back(expression_node(nodes, "X1", "2*S^2", Normal{0.0, 1.0}));
  nodes.push_back(expression_node(nodes, "X2", "S - X1^2", Normal{0.0, 1.0}));
  return ScmSpec("nlm", std::move(nodes), {0});
}

// Independent manipulable features: X1 := U1, X2 := U2.
inline ScmSpec imf() {
  std::vector<NodeSpec> nodes;
  nodes.push_back(binary_root("S"));
  nodes.push_back(linear_node("X1", {}, {}, 0.0, Normal{0.0, 1.0}));
  nodes.push_back(linear_node("X2", {}, {}, 0.0, Normal{0.0, 1.0}));
  return ScmSpec("imf", std::move(nodes), {0});
}

// Semi-synthetic loan model; G (gender) is the sensitive attribute.
inline ScmSpec loan() {
  std::vector<NodeSpec> nodes;
  nodes.push_back(binary_root("G"));
  nodes.push_back(linear_node("A", {}, {}, -35.0, Gamma{10.0, 3.5}));
  {
    auto e = expression_node(nodes, "E", "-1 + 0.5*G + logistic(0.1*A)", Normal{0.0, 0.25});
    e.link = Link::Logistic;
    e.link_offset = -0.5;
    nodes.push_back(std::move(e));
  }
  nodes.push_back(expression_node(nodes, "L", "1 + 0.01*(A - 5)*(5 - A) + G", Normal{0.0, 4.0}));
  nodes.push_back(linear_node("D", {1, 0, 3}, {0.1, 2.0, 1.0}, -1.0, Normal{0.0, 9.0}));
  nodes.push_back(expression_node(nodes, "I", "-4 + 0.1*(A + 35) + 2*G + G*E", Normal{0.0, 4.0}));
  nodes.push_back(expression_node(nodes, "S", "-4 + 1.5*ind(I)*I", Normal{0.0, 25.0}));
  return ScmSpec("loan", std::move(nodes), {0});
}

}  // namespace builtin

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"lin", "nlm", "imf", "loan"};
  return names;
}

inline SyntheticModel builtin_model(std::string_view name) {
  if (name == "lin") return {builtin::lin(), "logistic(X1 + X2)", "glm"};
  if (name == "nlm") return {builtin::nlm(), "logistic((X1 + X2)^2)", "mlp"};
  if (name == "imf") return {builtin::imf(), "logistic(X1 + X2)", "glm"};
  if (name == "loan") return {builtin::loan(), "logistic(0.3*(-L - D + I + S + I*S))", "mlp"};
  throw Error("unknown built-in scm '" + std::string(name) + "' (expected lin, nlm, imf or loan)");
}

inline ScmSpec builtin_scm(std::string_view name) { return builtin_model(name).scm; }

}  // namespace capfair
