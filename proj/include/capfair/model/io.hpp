#pragma once

#include "capfair/model/classifier.hpp"
#include "capfair/scm/io.hpp"

namespace capfair {

inline Json to_json(const Classifier& c) {
  const auto& s = c.spec();
  const Vector& p = c.params();
  return {{"architecture", s.arch == ModelSpec::Arch::Glm ? "glm" : "mlp"},
          {"input_dim", s.input_dim},
          {"hidden", s.hidden},
          {"activation", s.activation},
          {"params", std::vector<double>(p.data(), p.data() + p.size())}};
}

inline Classifier classifier_from_json(const Json& j) {
  try {
    ModelSpec s;
    const auto arch = j.at("architecture").get<std::string>();
    if (arch == "glm") {
      s.arch = ModelSpec::Arch::Glm;
    } else if (arch == "mlp") {
      s.arch = ModelSpec::Arch::Mlp;
    } else {
      throw Error("unknown architecture '" + arch + "'");
    }
    s.input_dim = j.at("input_dim").get<Index>();
    s.hidden = j.value("hidden", std::vector<Index>{});
    s.activation = j.value("activation", std::string("tanh"));
    const auto raw = j.at("params").get<std::vector<double>>();
    return Classifier(s, Eigen::Map<const Vector>(raw.data(), static_cast<Index>(raw.size())));
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed model json: ") + e.what());
  }
}

}  // namespace capfair
