#pragma once

#include "capfair/data/dataset.hpp"
#include "capfair/train/objectives.hpp"

#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace capfair {

enum class TrainerKind { Erm, Al, Llr, Ross, Cal, Capify };

inline const std::vector<TrainerKind>& all_trainers() {
  static const std::vector<TrainerKind> kinds{TrainerKind::Al,  TrainerKind::Cal, TrainerKind::Capify,
                                              TrainerKind::Erm, TrainerKind::Llr, TrainerKind::Ross};
  return kinds;
}

inline std::string to_string(TrainerKind k) {
  switch (k) {
    case TrainerKind::Erm: return "ERM";
    case TrainerKind::Al: return "AL";
    case TrainerKind::Llr: return "LLR";
    case TrainerKind::Ross: return "ROSS";
    case TrainerKind::Cal: return "CAL";
    default: return "CAPIFY";
  }
}

inline TrainerKind parse_trainer(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (TrainerKind k : all_trainers()) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown trainer '" + s + "' (expected ERM, AL, LLR, ROSS, CAL or CAPIFY)");
}

struct TrainConfig {
  TrainerKind kind = TrainerKind::Erm;
  double delta = 0.05;
  double mu1 = 1.0;
  double mu2 = 1.0;
  double mu3 = 1.0;
  double lr = 1e-3;
  Index batch_size = 100;
  int epochs = 10;
  int pgd_steps = 10;
  double pgd_step_size = 0.0;  // <= 0 selects delta / 4
  int pgd_restarts = 1;
  double fd_step = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(delta >= 0.0)) throw Error("train config: delta must be >= 0");
    if (mu1 < 0.0 || mu2 < 0.0 || mu3 < 0.0) throw Error("train config: regularizer weights must be >= 0");
    if (!(lr > 0.0)) throw Error("train config: lr must be > 0");
    if (batch_size <= 0) throw Error("train config: batch_size must be > 0");
    if (epochs <= 0) throw Error("train config: epochs must be > 0");
    if (pgd_steps < 0 || pgd_restarts < 0) throw Error("train config: pgd budget must be >= 0");
    if (!(fd_step > 0.0)) throw Error("train config: fd_step must be > 0");
  }

  [[nodiscard]] PgdOptions pgd(NormP p) const { return {pgd_steps, pgd_step_size, pgd_restarts, p}; }
};

struct TrainedModel {
  Classifier model;
  TrainConfig config;
  std::string dataset_id;
  std::string scm_id;
  std::vector<double> loss_trace;  // mean objective per epoch
  std::vector<Vector> param_trace;  // parameters after each step, when requested
};

struct TrainOptions {
  bool record_params = false;
};

// Rows whose weighted loss has the gradient of the batch objective (before
// division by the batch size). Returns the summed objective value.
inline double objective_rows(TrainerKind kind, const Classifier& model, const FairMetric& metric, const Matrix& v,
                             const Vector& y, const TrainConfig& cfg, Rng& rng, ObjectiveRows& rows) {
  const Index m = v.cols();
  const PgdOptions opt = cfg.pgd(metric.config().p);
  const auto& cont = metric.continuous();
  auto add_all = [&rows, &y](const Matrix& x, double c) {
    for (Index i = 0; i < x.cols(); ++i) rows.add(x.col(i), y[i], c);
  };
  Vector base;
  auto base_loss = [&]() {
    model.backward(v, y, Vector::Ones(m), Target::Loss, nullptr, nullptr, &base);
    return base.sum();
  };

  switch (kind) {
    case TrainerKind::Erm:
      add_all(v, 1.0);
      return base_loss();
    case TrainerKind::Al: {
      const auto r = inner_max_plain_batch(model, cont, v, y, cfg.delta, opt, rng);
      add_all(r.points, 1.0);
      return r.value.sum();
    }
    case TrainerKind::Cal: {
      const auto r = inner_max_cap_batch(model, metric, v, y, cfg.delta, opt, rng);
      add_all(r.points, 1.0);
      return r.value.sum();
    }
    case TrainerKind::Ross: {
      add_all(v, 1.0);
      double total = base_loss();
      if (cfg.mu1 != 0.0) {
        const Vector ones = Vector::Ones(m);
        const auto r = raw_search(model, cont, v, ones, cfg.delta, -1.0, opt, rng);
        for (Index i = 0; i < m; ++i) rows.add(r.points.col(i), 1.0, cfg.mu1);
        total += cfg.mu1 * (-r.value.sum());
      }
      return total;
    }
    case TrainerKind::Llr: {
      add_all(v, 1.0);
      const double total = base_loss();
      const auto space = PerturbationSpace::raw(cont);
      const Vector reg = local_linearity_rows(model, space, v, y, cfg.delta, {cfg.mu1, cfg.mu2, 1.0, cfg.fd_step},
                                              opt, rng, rows);
      return total + reg.sum();
    }
    default: {
      add_all(v, 1.0);
      const double total = base_loss();
      const Vector reg = capify_rows(model, metric, v, y, cfg.delta, {cfg.mu1, cfg.mu2, cfg.mu3, cfg.fd_step}, opt,
                                     rng, rows);
      return total + reg.sum();
    }
  }
}

// Adam over shuffled mini-batches. Stream 1 seeds the initialization,
// stream 2 the shuffling and stream 3 the perturbation searches.
inline TrainedModel train(const Dataset& data, const FairMetric& metric, const ModelSpec& spec, const TrainConfig& cfg,
                          const TrainOptions& options = {}) {
  cfg.validate();
  data.validate();
  if (data.dim() != metric.scm().size()) {
    throw Error("dataset has " + std::to_string(data.dim()) + " features but the scm has " +
                std::to_string(metric.scm().size()) + " nodes");
  }
  TrainedModel out{Classifier::initialized(spec, derive_seed(cfg.seed, 1)), cfg, data.source, metric.scm().name(), {}, {}};
  Classifier& model = out.model;
  Vector params = model.params();
  Adam adam(params.size(), {cfg.lr});
  Rng shuffle_rng(derive_seed(cfg.seed, 2));
  Rng search_rng(derive_seed(cfg.seed, 3));

  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  Vector grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_total = 0.0;
    for (Index start = 0; start < data.size(); start += cfg.batch_size) {
      const Index b = std::min(cfg.batch_size, data.size() - start);
      Matrix v(data.dim(), b);
      Vector y(b);
      for (Index k = 0; k < b; ++k) {
        const Index idx = order[static_cast<std::size_t>(start + k)];
        v.col(k) = data.x.col(idx);
        y[k] = data.y[idx];
      }
      ObjectiveRows rows;
      const double value = objective_rows(cfg.kind, model, metric, v, y, cfg, search_rng, rows);
      if (!std::isfinite(value)) {
        throw Error("non-finite training objective (" + to_string(cfg.kind) + ", epoch " + std::to_string(epoch) +
                    ", batch starting at " + std::to_string(start) + ")");
      }
      epoch_total += value;
      model.backward(rows.inputs(), rows.labels(), rows.coefficients(), Target::Loss, &grad, nullptr);
      grad /= static_cast<double>(b);
      if (!grad.allFinite()) {
        throw Error("non-finite gradient (" + to_string(cfg.kind) + ", epoch " + std::to_string(epoch) + ")");
      }
      adam.step(params, grad);
      model.set_params(params);
      if (options.record_params) out.param_trace.push_back(params);
    }
    out.loss_trace.push_back(epoch_total / static_cast<double>(data.size()));
  }
  return out;
}

}  // namespace capfair
