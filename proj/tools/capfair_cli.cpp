#include "capfair/capfair.hpp"
#include "capfair/train/config_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

using namespace capfair;
namespace fs = std::filesystem;

namespace {

fs::path out_path(const std::string& dir, const std::string& file) {
  fs::path d(dir);
  fs::create_directories(d);
  return d / file;
}

std::string default_out_dir() {
  const char* env = std::getenv("CAPFAIR_OUT");
  return env && *env ? std::string(env) : std::string(".");
}

// Model files wrap the classifier with training metadata; bare classifier JSON is accepted too.
Classifier load_model(const std::string& path) {
  const Json j = read_json_file(path);
  if (j.contains("mitigation")) throw Error("'" + path + "' is a post-processed model; pass its base model instead");
  return classifier_from_json(j.contains("model") ? j.at("model") : j);
}

MetricConfig load_metric(const std::string& path) {
  return path.empty() ? MetricConfig{} : metric_config_from_json(read_json_file(path));
}

Json accounting_json(const MitigationAccounting& a) {
  return {{"cf_before", a.cf_before},           {"flip_mass", a.flip_mass},
          {"twin_mass", a.twin_mass},           {"predicted_cf_after", a.predicted},
          {"cf_after", a.cf_after},             {"standard_error", a.standard_error},
          {"accuracy_before", a.accuracy_before}, {"accuracy_after", a.accuracy_after}};
}

struct Common {
  std::string out = default_out_dir();
};

struct GenArgs {
  std::string dataset = "lin";
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  bool standardize = false;
  std::string prefix;
};

void run_gen(const Common& c, const GenArgs& a) {
  Generated g = gen_dataset(a.dataset, a.n, a.seed);
  const std::string prefix = a.prefix.empty() ? a.dataset : a.prefix;
  ScmSpec scm = g.scm;
  Dataset data = g.data;
  if (a.standardize) {
    const Standardization s = fit_standardization(data, scm.continuous_indices());
    scm = standardize_scm(scm, s);
    data = apply_standardization(data, s);
    Json sj{{"columns", s.columns},
            {"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
            {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
    write_json_file(out_path(c.out, prefix + "_standardization.json").string(), sj);
  }
  const auto csv = out_path(c.out, prefix + "_data.csv");
  const auto scm_file = out_path(c.out, prefix + "_scm.json");
  write_dataset_csv(csv.string(), data);
  Json sj = to_json(scm);
  sj["classifier"] = g.classifier;
  write_json_file(scm_file.string(), sj);
  std::cout << "wrote " << csv.string() << " (" << data.size() << " rows) and " << scm_file.string() << '\n';
}

struct TrainArgs {
  std::string data;
  std::string scm;
  std::string config;
  std::string metric;
  std::string arch = "auto";
  std::vector<Index> hidden{100, 100, 100};
  std::string model_out;
  // CLI overrides, applied over the config file.
  std::optional<std::string> trainer;
  std::optional<double> delta, mu1, mu2, mu3, lr, fd_step;
  std::optional<Index> batch_size;
  std::optional<int> epochs, pgd_steps, pgd_restarts;
  std::optional<std::uint64_t> seed;
};

void run_train(const Common& c, const TrainArgs& a) {
  const Json scm_json = read_json_file(a.scm);
  const ScmSpec scm = scm_from_json(scm_json);
  const Dataset data = read_dataset_csv(a.data, scm.names());
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : train_config_from_json(read_json_file(a.config));
  if (a.trainer) cfg.kind = parse_trainer(*a.trainer);
  if (a.delta) cfg.delta = *a.delta;
  if (a.mu1) cfg.mu1 = *a.mu1;
  if (a.mu2) cfg.mu2 = *a.mu2;
  if (a.mu3) cfg.mu3 = *a.mu3;
  if (a.lr) cfg.lr = *a.lr;
  if (a.fd_step) cfg.fd_step = *a.fd_step;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.pgd_steps) cfg.pgd_steps = *a.pgd_steps;
  if (a.pgd_restarts) cfg.pgd_restarts = *a.pgd_restarts;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();

  std::string arch = a.arch;
  if (arch == "auto") arch = scm_json.value("classifier", std::string("mlp"));
  ModelSpec spec;
  if (arch == "glm") {
    spec = ModelSpec::glm(scm.size());
  } else if (arch == "mlp") {
    spec = ModelSpec::mlp(scm.size(), a.hidden);
  } else {
    throw Error("unknown architecture '" + arch + "' (glm, mlp or auto)");
  }
  const MetricConfig mc = load_metric(a.metric);
  const FairMetric metric(scm, mc);
  const TrainedModel tm = train(data, metric, spec, cfg);
  Json out{{"model", to_json(tm.model)},
           {"config", to_json(cfg)},
           {"metric", to_json(mc)},
           {"dataset", a.data},
           {"scm", scm.name()},
           {"loss_trace", tm.loss_trace}};
  const auto path = a.model_out.empty() ? out_path(c.out, "model.json") : fs::path(a.model_out);
  write_json_file(path.string(), out);
  std::cout << to_string(cfg.kind) << " trained for " << cfg.epochs << " epochs, final loss "
            << tm.loss_trace.back() << "; wrote " << path.string() << '\n';
}

struct AuditArgs {
  std::string model;
  std::string data;
  std::string scm;
  std::string metric;
  std::string report_out;
  AuditOptions opt;
};

void run_audit(const Common& c, const AuditArgs& a) {
  const ScmSpec scm = scm_from_json(read_json_file(a.scm));
  const Dataset data = read_dataset_csv(a.data, scm.names());
  const Classifier model = load_model(a.model);
  const FairMetric metric(scm, load_metric(a.metric));
  const AuditReport rep = audit(model, metric, data, a.opt);
  Json j = to_json(rep);
  j["options"] = to_json(a.opt);
  j["model"] = a.model;
  j["dataset"] = a.data;
  const auto path = a.report_out.empty() ? out_path(c.out, "audit.json") : fs::path(a.report_out);
  write_json_file(path.string(), j);
  std::cout << j.dump(2) << '\n';
}

struct MitigateArgs {
  std::string model;
  std::string scm;
  std::string data;
  std::string measure;
  std::string direction = "positive";
  std::string model_out;
  std::string report_out;
};

void run_mitigate(const Common& c, const MitigateArgs& a) {
  const ScmSpec scm = scm_from_json(read_json_file(a.scm));
  const Dataset data = read_dataset_csv(a.data, scm.names());
  const Json model_json = read_json_file(a.model);
  const Classifier model = load_model(a.model);
  FlipDirection dir;
  if (a.direction == "positive") {
    dir = FlipDirection::ToPositive;
  } else if (a.direction == "negative") {
    dir = FlipDirection::ToNegative;
  } else {
    throw Error("direction must be 'positive' or 'negative'");
  }
  // Without a separate measurement file the data is split in two halves.
  Dataset estimate = data;
  Dataset measure;
  if (!a.measure.empty()) {
    measure = read_dataset_csv(a.measure, scm.names());
  } else {
    if (data.size() < 2) throw Error("mitigate: need at least two rows to split");
    const Split s = split_dataset(data, 0.5, 0);
    estimate = s.train;
    measure = s.test;
  }
  const auto mitigated = counterfactual_mitigate(model, scm, select_all(), dir);
  const MitigationAccounting acc = mitigation_accounting(mitigated, scm, estimate, measure);

  Json wrapped{{"base", model_json.contains("model") ? model_json.at("model") : model_json},
               {"mitigation", {{"direction", a.direction}, {"selector", "all"}, {"scm", to_json(scm)}}}};
  const auto model_path = a.model_out.empty() ? out_path(c.out, "mitigated_model.json") : fs::path(a.model_out);
  const auto report_path = a.report_out.empty() ? out_path(c.out, "mitigation.json") : fs::path(a.report_out);
  write_json_file(model_path.string(), wrapped);
  const Json report = accounting_json(acc);
  write_json_file(report_path.string(), report);
  std::cout << report.dump(2) << '\n';
}

struct BenchArgs {
  std::vector<std::string> trainers;
  std::vector<std::string> datasets{"lin", "nlm", "imf", "loan"};
  int seeds = 10;
  std::uint64_t root_seed = 0;
  std::size_t n = 2000;
  std::string config;
  std::string metric;
  std::optional<int> epochs;
  std::vector<double> radii{0.05, 0.01};
  unsigned workers = 1;
  bool quiet = false;
};

void run_bench(const Common& c, const BenchArgs& a) {
  BenchPlan plan;
  if (!a.trainers.empty()) {
    plan.trainers.clear();
    for (const auto& t : a.trainers) plan.trainers.push_back(parse_trainer(t));
  }
  plan.datasets = a.datasets;
  plan.seeds = a.seeds;
  plan.root_seed = a.root_seed;
  plan.samples = a.n;
  if (!a.config.empty()) plan.train = train_config_from_json(read_json_file(a.config));
  if (a.epochs) plan.train.epochs = *a.epochs;
  plan.metric = load_metric(a.metric);
  plan.audit.radii = a.radii;
  plan.validate();

  const auto start = std::chrono::steady_clock::now();
  BenchProgress progress;
  if (!a.quiet) {
    progress = [](const std::string& t, const std::string& d, int s) {
      std::cerr << "[bench] " << t << " on " << d << " seed " << s << '\n';
    };
  }
  const BenchResult res = run_benchmark(plan, progress, a.workers);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_text(out_path(c.out, "results.csv"), results_csv(res.rows));
  write_text(out_path(c.out, "summary.csv"), summary_csv(res.rows));
  write_text(out_path(c.out, "summary.md"), summary_table(res.rows, plan.datasets));
  Json failures = Json::array();
  for (const auto& f : res.failures) {
    failures.push_back({{"trainer", f.trainer}, {"dataset", f.dataset}, {"seed", f.seed}, {"message", f.message}});
  }
  write_json_file(out_path(c.out, "failures.json").string(), failures);
  std::cout << summary_table(res.rows, plan.datasets) << res.rows.size() << " runs, " << res.failures.size()
            << " failures, " << secs << " s; results in " << c.out << '\n';
}

struct FitArgs {
  std::string csv;
  std::string dag;
  std::string scm_out;
};

void run_fit(const Common& c, const FitArgs& a) {
  const Fitted f = ingest_csv(a.csv, dag_from_json(read_json_file(a.dag)));
  const auto path = a.scm_out.empty() ? out_path(c.out, f.scm.name() + "_scm.json") : fs::path(a.scm_out);
  write_json_file(path.string(), to_json(f.scm));
  std::cout << "fitted " << f.scm.size() << " nodes on " << f.data.size() << " rows; wrote " << path.string()
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capfair: causal fairness-aware adversarial training and auditing"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-o,--out", common.out, "Output directory (default: $CAPFAIR_OUT or .)");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a built-in dataset and its SCM");
  g->add_option("-d,--dataset", gen.dataset, "lin, nlm, imf or loan")->required();
  g->add_option("-n,--samples", gen.n, "Number of samples");
  g->add_option("-s,--seed", gen.seed, "Seed");
  g->add_flag("--standardize", gen.standardize, "Standardize continuous columns and the SCM");
  g->add_option("--prefix", gen.prefix, "File name prefix (default: dataset name)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a classifier");
  t->add_option("--data", tr.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  t->add_option("--scm", tr.scm, "SCM JSON")->required()->check(CLI::ExistingFile);
  t->add_option("-c,--config", tr.config, "Train config JSON")->check(CLI::ExistingFile);
  t->add_option("--metric", tr.metric, "Fair metric config JSON")->check(CLI::ExistingFile);
  t->add_option("--arch", tr.arch, "glm, mlp or auto");
  t->add_option("--hidden", tr.hidden, "Hidden layer widths for mlp");
  t->add_option("--model-out", tr.model_out, "Model file (default: <out>/model.json)");
  t->add_option("--trainer", tr.trainer, "ERM, AL, LLR, ROSS, CAL or CAPIFY");
  t->add_option("--delta", tr.delta);
  t->add_option("--mu1", tr.mu1);
  t->add_option("--mu2", tr.mu2);
  t->add_option("--mu3", tr.mu3);
  t->add_option("--lr", tr.lr);
  t->add_option("--fd-step", tr.fd_step);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--epochs", tr.epochs);
  t->add_option("--pgd-steps", tr.pgd_steps);
  t->add_option("--pgd-restarts", tr.pgd_restarts);
  t->add_option("--seed", tr.seed);

  AuditArgs au;
  auto* a = app.add_subcommand("audit", "Audit a classifier for CF, CAPI unfairness and robustness");
  a->add_option("--model", au.model, "Model JSON")->required()->check(CLI::ExistingFile);
  a->add_option("--data", au.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  a->add_option("--scm", au.scm, "SCM JSON")->required()->check(CLI::ExistingFile);
  a->add_option("--metric", au.metric, "Fair metric config JSON")->check(CLI::ExistingFile);
  a->add_option("--radii", au.opt.radii, "Audit radii");
  a->add_option("--pgd-steps", au.opt.pgd_steps);
  a->add_option("--restarts", au.opt.restarts);
  a->add_option("--seed", au.opt.seed);
  a->add_flag("!--no-closed-form", au.opt.closed_form, "Always use the PGD search");
  a->add_option("--report-out", au.report_out, "Report file (default: <out>/audit.json)");

  MitigateArgs mi;
  auto* m = app.add_subcommand("mitigate", "Flip labels on the counterfactually unfair region");
  m->add_option("--model", mi.model, "Model JSON")->required()->check(CLI::ExistingFile);
  m->add_option("--scm", mi.scm, "SCM JSON")->required()->check(CLI::ExistingFile);
  m->add_option("--data", mi.data, "Dataset CSV for estimation")->required()->check(CLI::ExistingFile);
  m->add_option("--measure", mi.measure, "Independent dataset CSV for measurement")->check(CLI::ExistingFile);
  m->add_option("--direction", mi.direction, "positive or negative");
  m->add_option("--model-out", mi.model_out);
  m->add_option("--report-out", mi.report_out);

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Run trainers x datasets x seeds and write results");
  b->add_option("--trainers", be.trainers, "Trainer kinds (default: all)");
  b->add_option("--datasets", be.datasets);
  b->add_option("--seeds", be.seeds);
  b->add_option("--root-seed", be.root_seed);
  b->add_option("-n,--samples", be.n);
  b->add_option("-c,--config", be.config, "Train config JSON")->check(CLI::ExistingFile);
  b->add_option("--metric", be.metric, "Fair metric config JSON")->check(CLI::ExistingFile);
  b->add_option("--epochs", be.epochs);
  b->add_option("--radii", be.radii);
  b->add_option("-j,--workers", be.workers, "Worker threads (0: all cores)");
  b->add_flag("-q,--quiet", be.quiet);

  FitArgs fi;
  auto* f = app.add_subcommand("fit-scm", "Fit a linear additive-noise SCM to CSV data");
  f->add_option("--csv", fi.csv)->required()->check(CLI::ExistingFile);
  f->add_option("--dag", fi.dag, "DAG JSON")->required()->check(CLI::ExistingFile);
  f->add_option("--scm-out", fi.scm_out);

  CLI11_PARSE(app, argc, argv);
  try {
    if (g->parsed()) run_gen(common, gen);
    if (t->parsed()) run_train(common, tr);
    if (a->parsed()) run_audit(common, au);
    if (m->parsed()) run_mitigate(common, mi);
    if (b->parsed()) run_bench(common, be);
    if (f->parsed()) run_fit(common, fi);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
