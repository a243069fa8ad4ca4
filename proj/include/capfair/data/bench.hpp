#pragma once

#include "capfair/audit/unfairness.hpp"
#include "capfair/scm/io.hpp"
#include "capfair/data/generate.hpp"
#include "capfair/train/trainer.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace capfair {

struct BenchPlan {
  std::vector<TrainerKind> trainers = all_trainers();
  std::vector<std::string> datasets{"lin", "nlm", "imf", "loan"};
  int seeds = 10;
  std::uint64_t root_seed = 0;
  std::size_t samples = 2000;
  double train_fraction = 0.8;
  TrainConfig train;  // kind and seed are set per run
  AuditOptions audit;
  MetricConfig metric;

  void validate() const {
    if (trainers.empty() || datasets.empty() || seeds <= 0) throw Error("bench: the plan is empty");
    if (samples < 2) throw Error("bench: need at least two samples");
    train.validate();
  }
};

struct BenchRow {
  std::string trainer;
  std::string dataset;
  int seed = 0;
  AuditReport report;
};

struct BenchFailure {
  std::string trainer;
  std::string dataset;
  int seed = 0;
  std::string message;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<BenchFailure> failures;
};

// Standardized train/test data and the matching SCM for one (dataset, seed).
struct PreparedData {
  ScmSpec scm;
  Split split;
  std::string classifier;
};

inline PreparedData prepare_data(const std::string& name, std::size_t n, double train_fraction, std::uint64_t seed) {
  Generated g = gen_dataset(name, n, derive_seed(seed, 1));
  Split raw = split_dataset(g.data, train_fraction, derive_seed(seed, 2));
  const Standardization s = fit_standardization(raw.train, g.scm.continuous_indices());
  return {standardize_scm(g.scm, s), {apply_standardization(raw.train, s), apply_standardization(raw.test, s)},
          g.classifier};
}

inline std::uint64_t run_seed(std::uint64_t root, const std::string& dataset, int seed) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : dataset) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return derive_seed(derive_seed(root, static_cast<std::uint64_t>(seed)), h);
}

using BenchProgress = std::function<void(const std::string& trainer, const std::string& dataset, int seed)>;

// All trainers on one (dataset, seed) cell.
inline BenchResult run_bench_cell(const BenchPlan& plan, const std::string& name, int seed,
                                  const BenchProgress& progress) {
  BenchResult result;
  const std::uint64_t base = run_seed(plan.root_seed, name, seed);
  std::optional<PreparedData> data;
  std::optional<FairMetric> metric;
  try {
    data = prepare_data(name, plan.samples, plan.train_fraction, base);
    metric.emplace(data->scm, plan.metric);
  } catch (const std::exception& e) {
    for (TrainerKind k : plan.trainers) result.failures.push_back({to_string(k), name, seed, e.what()});
    return result;
  }
  const ModelSpec spec =
      data->classifier == "glm" ? ModelSpec::glm(data->scm.size()) : ModelSpec::mlp(data->scm.size());
  for (TrainerKind kind : plan.trainers) {
    if (progress) progress(to_string(kind), name, seed);
    try {
      TrainConfig cfg = plan.train;
      cfg.kind = kind;
      cfg.seed = derive_seed(base, 3);
      const TrainedModel tm = train(data->split.train, *metric, spec, cfg);
      AuditOptions aopt = plan.audit;
      aopt.seed = derive_seed(base, 4);
      result.rows.push_back({to_string(kind), name, seed, audit(tm.model, *metric, data->split.test, aopt)});
    } catch (const std::exception& e) {
      result.failures.push_back({to_string(kind), name, seed, e.what()});
    }
  }
  return result;
}

// Cells run on `workers` threads (0 picks the hardware concurrency). Every
// cell is seeded on its own, so the output does not depend on scheduling.
inline BenchResult run_benchmark(const BenchPlan& plan, const BenchProgress& progress = {}, unsigned workers = 1) {
  plan.validate();
  std::vector<std::pair<std::string, int>> cells;
  for (const auto& name : plan.datasets) {
    for (int seed = 0; seed < plan.seeds; ++seed) cells.emplace_back(name, seed);
  }
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cells.size()));

  std::vector<BenchResult> parts(cells.size());
  std::mutex progress_mutex;
  const BenchProgress guarded = progress ? BenchProgress([&](const std::string& t, const std::string& d, int s) {
    const std::lock_guard<std::mutex> lock(progress_mutex);
    progress(t, d, s);
  })
                                         : BenchProgress();
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      parts[k] = run_bench_cell(plan, cells[k].first, cells[k].second, guarded);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  BenchResult result;
  for (auto& p : parts) {
    std::move(p.rows.begin(), p.rows.end(), std::back_inserter(result.rows));
    std::move(p.failures.begin(), p.failures.end(), std::back_inserter(result.failures));
  }
  std::sort(result.rows.begin(), result.rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.trainer, a.dataset, a.seed) < std::tie(b.trainer, b.dataset, b.seed);
  });
  return result;
}

inline std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

inline double report_value(const AuditReport& r, const std::string& metric) {
  auto at = [](const std::map<double, double>& m, double key) {
    const auto it = m.find(key);
    if (it == m.end()) throw Error("audit report lacks radius " + std::to_string(key));
    return it->second;
  };
  if (metric == "A") return r.accuracy;
  if (metric == "M") return r.mcc;
  if (metric == "CF") return r.cf;
  if (metric == "U_005") return at(r.uai, 0.05);
  if (metric == "U_001") return at(r.uai, 0.01);
  if (metric == "R_005") return at(r.robustness, 0.05);
  if (metric == "R_001") return at(r.robustness, 0.01);
  throw Error("unknown metric '" + metric + "'");
}

inline const std::vector<std::string>& result_metrics() {
  static const std::vector<std::string> m{"A", "M", "U_005", "U_001", "CF", "R_005", "R_001"};
  return m;
}

inline std::string results_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "trainer,dataset,seed";
  for (const auto& m : result_metrics()) out << ',' << m;
  out << '\n';
  for (const auto& r : rows) {
    out << r.trainer << ',' << r.dataset << ',' << r.seed;
    for (const auto& m : result_metrics()) out << ',' << fixed6(report_value(r.report, m));
    out << '\n';
  }
  return out.str();
}

struct SummaryCell {
  int runs = 0;
  std::map<std::string, double> mean;
  std::map<std::string, double> sd;  // sample standard deviation
};

// Keyed by (trainer, dataset).
inline std::map<std::pair<std::string, std::string>, SummaryCell> summarize(const std::vector<BenchRow>& rows) {
  std::map<std::pair<std::string, std::string>, std::vector<const BenchRow*>> groups;
  for (const auto& r : rows) groups[{r.trainer, r.dataset}].push_back(&r);
  std::map<std::pair<std::string, std::string>, SummaryCell> out;
  for (const auto& [key, group] : groups) {
    SummaryCell cell;
    cell.runs = static_cast<int>(group.size());
    for (const auto& m : result_metrics()) {
      double sum = 0.0;
      for (const auto* r : group) sum += report_value(r->report, m);
      const double mean = sum / static_cast<double>(group.size());
      double ss = 0.0;
      for (const auto* r : group) ss += std::pow(report_value(r->report, m) - mean, 2);
      cell.mean[m] = mean;
      cell.sd[m] = group.size() > 1 ? std::sqrt(ss / static_cast<double>(group.size() - 1)) : 0.0;
    }
    out[key] = std::move(cell);
  }
  return out;
}

inline std::string summary_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "trainer,dataset,runs";
  for (const auto& m : result_metrics()) out << ',' << m << "_mean," << m << "_sd";
  out << '\n';
  for (const auto& [key, cell] : summarize(rows)) {
    out << key.first << ',' << key.second << ',' << cell.runs;
    for (const auto& m : result_metrics()) out << ',' << fixed6(cell.mean.at(m)) << ',' << fixed6(cell.sd.at(m));
    out << '\n';
  }
  return out.str();
}

// Trainers as rows, one block of A / U_.05 / CF / R_.05 per dataset, cells "mean ± sd".
inline std::string summary_table(const std::vector<BenchRow>& rows, const std::vector<std::string>& datasets) {
  const auto cells = summarize(rows);
  std::vector<std::string> trainers;
  for (const auto& [key, cell] : cells) {
    if (std::find(trainers.begin(), trainers.end(), key.first) == trainers.end()) trainers.push_back(key.first);
  }
  const std::vector<std::string> shown{"A", "U_005", "CF", "R_005"};
  std::ostringstream out;
  out << "| trainer |";
  for (const auto& d : datasets) {
    for (const auto& m : shown) out << ' ' << d << ' ' << m << " |";
  }
  out << "\n|---|";
  for (std::size_t k = 0; k < datasets.size() * shown.size(); ++k) out << "---|";
  out << '\n';
  for (const auto& t : trainers) {
    out << "| " << t << " |";
    for (const auto& d : datasets) {
      const auto it = cells.find({t, d});
      for (const auto& m : shown) {
        if (it == cells.end()) {
          out << " - |";
        } else {
          char buf[64];
          std::snprintf(buf, sizeof buf, " %.3f ± %.3f |", it->second.mean.at(m), it->second.sd.at(m));
          out << buf;
        }
      }
    }
    out << '\n';
  }
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

inline Json to_json(const AuditReport& r) {
  Json uai = Json::object();
  for (const auto& [k, v] : r.uai) uai[fixed6(k)] = v;
  Json rob = Json::object();
  for (const auto& [k, v] : r.robustness) rob[fixed6(k)] = v;
  return {{"accuracy", r.accuracy}, {"mcc", r.mcc},       {"cf_rate", r.cf},
          {"uai", uai},            {"robustness", rob}, {"samples", r.samples},
          {"search", {{"method", r.method}, {"pgd_steps", r.pgd_steps}, {"restarts", r.restarts}}}};
}

}  // namespace capfair
