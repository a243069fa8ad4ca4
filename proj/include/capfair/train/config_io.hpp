#pragma once

// JSON forms of the run configuration objects. Every key is optional on
// input; missing keys keep their defaults.

#include "capfair/audit/unfairness.hpp"
#include "capfair/scm/io.hpp"
#include "capfair/train/trainer.hpp"

namespace capfair {

inline Json to_json(const Pseudometric& pm) {
  switch (pm.kind()) {
    case Pseudometric::Kind::Trivial:
      return "trivial";
    case Pseudometric::Kind::Discrete:
      return "discrete";
    default: {
      Json rows = Json::array();
      const Matrix& t = pm.table_values();
      for (Index a = 0; a < t.rows(); ++a) {
        Json row = Json::array();
        for (Index b = 0; b < t.cols(); ++b) row.push_back(t(a, b));
        rows.push_back(row);
      }
      return {{"table", rows}};
    }
  }
}

inline Pseudometric pseudometric_from_json(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "trivial") return Pseudometric::trivial();
    if (s == "discrete") return Pseudometric::discrete();
    throw Error("unknown sensitive pseudometric '" + s + "' (trivial, discrete or {\"table\": ...})");
  }
  if (j.is_object() && j.contains("table")) {
    const auto rows = j.at("table").get<std::vector<std::vector<double>>>();
    Matrix t(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
    for (std::size_t a = 0; a < rows.size(); ++a) {
      if (rows[a].size() != rows.size()) throw Error("pseudometric table must be square");
      for (std::size_t b = 0; b < rows.size(); ++b) t(static_cast<Index>(a), static_cast<Index>(b)) = rows[a][b];
    }
    return Pseudometric::table(t);
  }
  throw Error("malformed sensitive pseudometric");
}

inline Json to_json(const MetricConfig& m) {
  Json s = Json::array();
  for (const auto& pm : m.sensitive) s.push_back(to_json(pm));
  return {{"sensitive", s}, {"p", to_string(m.p)}};
}

inline MetricConfig metric_config_from_json(const Json& j) {
  MetricConfig m;
  if (j.contains("sensitive")) {
    const Json& s = j.at("sensitive");
    m.sensitive.clear();
    if (s.is_array()) {
      for (const auto& e : s) m.sensitive.push_back(pseudometric_from_json(e));
    } else {
      m.sensitive.push_back(pseudometric_from_json(s));
    }
  }
  if (j.contains("p")) m.p = parse_norm(j.at("p").is_string() ? j.at("p").get<std::string>() : j.at("p").dump());
  return m;
}

inline Json to_json(const TrainConfig& c) {
  return {{"trainer", to_string(c.kind)}, {"delta", c.delta},
          {"mu1", c.mu1},                 {"mu2", c.mu2},
          {"mu3", c.mu3},                 {"lr", c.lr},
          {"batch_size", c.batch_size},   {"epochs", c.epochs},
          {"pgd_steps", c.pgd_steps},     {"pgd_step_size", c.pgd_step_size},
          {"pgd_restarts", c.pgd_restarts}, {"fd_step", c.fd_step},
          {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const Json& j, TrainConfig c = {}) {
  try {
    if (j.contains("trainer")) c.kind = parse_trainer(j.at("trainer").get<std::string>());
    c.delta = j.value("delta", c.delta);
    c.mu1 = j.value("mu1", c.mu1);
    c.mu2 = j.value("mu2", c.mu2);
    c.mu3 = j.value("mu3", c.mu3);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.pgd_steps = j.value("pgd_steps", c.pgd_steps);
    c.pgd_step_size = j.value("pgd_step_size", c.pgd_step_size);
    c.pgd_restarts = j.value("pgd_restarts", c.pgd_restarts);
    c.fd_step = j.value("fd_step", c.fd_step);
    c.seed = j.value("seed", c.seed);
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

inline Json to_json(const AuditOptions& a) {
  return {{"pgd_steps", a.pgd_steps}, {"restarts", a.restarts}, {"radii", a.radii},
          {"seed", a.seed},           {"closed_form", a.closed_form}};
}

inline AuditOptions audit_options_from_json(const Json& j, AuditOptions a = {}) {
  try {
    a.pgd_steps = j.value("pgd_steps", a.pgd_steps);
    a.restarts = j.value("restarts", a.restarts);
    a.radii = j.value("radii", a.radii);
    a.seed = j.value("seed", a.seed);
    a.closed_form = j.value("closed_form", a.closed_form);
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed audit options: ") + e.what());
  }
  return a;
}

}  // namespace capfair
