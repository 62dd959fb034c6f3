#include "commands.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "config.hpp"
#include "owlkit/kmeans.hpp"
#include "owlkit/manifest.hpp"
#include "owlkit/metrics.hpp"
#include "owlkit/owl.hpp"
#include "owlkit/rng.hpp"
#include "owlkit/state.hpp"
#include "owlkit/strategies.hpp"
#include "owlkit/synth.hpp"

namespace owlkit::cli {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Argument:
    case ErrorKind::Config: return 2;
    case ErrorKind::Numeric: return 4;
    default: return 3;
  }
}

namespace {

// ---- shared helpers -------------------------------------------------------

void setup_logging() {
  auto logger = spdlog::get("owlkit");
  if (!logger) {
    logger = spdlog::stderr_color_mt("owlkit");
    logger->set_pattern("owlkit [%l] %v");
    spdlog::set_default_logger(logger);
  }
  const char* env = std::getenv("OWLKIT_LOG");
  const std::string level = env ? env : "warn";
  static const std::map<std::string, spdlog::level::level_enum> levels = {
      {"error", spdlog::level::err}, {"warn", spdlog::level::warn},
      {"info", spdlog::level::info}, {"debug", spdlog::level::debug}};
  const auto it = levels.find(level);
  logger->set_level(it != levels.end() ? it->second : spdlog::level::warn);
  if (it == levels.end()) spdlog::warn("ignoring OWLKIT_LOG={} (expected error, warn, info or debug)", level);
}

RunConfig run_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
  if (seed) cfg.owl.seed = *seed;
  return cfg;
}

const SessionManifest& entry(const Manifest& m, SessionRole role, int index) {
  const auto* e = m.find(role, index);
  require(e != nullptr, ErrorKind::Data,
          "manifest has no " + std::string(to_string(role)) + " entry for session " + std::to_string(index));
  return *e;
}

EmbeddingSet load_labeled(const Manifest& m, SessionRole role, int index) {
  auto set = m.load(entry(m, role, index));
  require(set.labeled(), ErrorKind::Data,
          std::string(to_string(role)) + " " + std::to_string(index) + " has no label file");
  return set;
}

std::string pct(double fraction) {
  return fmt::format("{:.2f}", metrics::round_half_up(fraction * 100.0, 2));
}

std::string pct(const std::optional<double>& fraction) { return fraction ? pct(*fraction) : ""; }

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
}

// Rows of X (with labels) split by whether the label is below `first_new`.
struct LabeledSplit {
  Matrix new_X, old_X;
  LabelVector new_y, old_y;
};

LabeledSplit split_by_label(const EmbeddingSet& set, Label first_new) {
  IndexVector fresh, old;
  for (std::size_t i = 0; i < set.size(); ++i) ((*set.labels)[i] >= first_new ? fresh : old).push_back(i);
  const auto a = set.subset(fresh);
  const auto b = set.subset(old);
  return {a.to_matrix(), b.to_matrix(), *a.labels, *b.labels};
}

// ---- fit-base / owl-run ---------------------------------------------------

struct PipelineOptions {
  std::string manifest;
  std::string config;
  std::string state;
  std::optional<std::uint64_t> seed;
  std::optional<int> sessions;
};

void fit_base(const PipelineOptions& o) {
  const auto cfg = run_config(o.config, o.seed);
  const auto m = load_manifest(o.manifest);
  const auto train = load_labeled(m, SessionRole::BaseTrain, 0);
  const auto val = load_labeled(m, SessionRole::BaseVal, 0);
  spdlog::info("base phase: {} samples, d={}", train.size(), train.dim());
  const auto state = run_base(train, val, cfg.owl);
  save_state(state, o.state);
  spdlog::info("base state with {} classes written to {}", state.registry.size(), o.state);
}

void owl_run(const PipelineOptions& o) {
  const auto cfg = run_config(o.config, std::nullopt);
  const auto m = load_manifest(o.manifest);
  auto state = load_state(o.state);
  if (o.seed) state.rng_seed = *o.seed;
  int done = 0;
  for (int t = static_cast<int>(state.session_logs.size()); t <= m.last_session(); ++t) {
    if (o.sessions && done >= *o.sessions) break;
    const auto input = m.load(entry(m, SessionRole::SessionTrain, t));
    const auto test = load_labeled(m, SessionRole::SessionTest, t);
    auto [next, outcome] = run_open_session(state, input, test, cfg.owl);
    spdlog::info("session {}: {} inputs, {} flagged, {} new classes, accuracy {}", t, outcome.n_input,
                 outcome.n_flagged_ood, outcome.discovered_k, pct(outcome.log.session_acc));
    state = std::move(next);
    save_state(state, o.state);
    ++done;
  }
  if (done == 0) save_state(state, o.state);
}

// ---- ood-eval -------------------------------------------------------------

struct OodOptions {
  std::string id;
  std::vector<std::string> ood;
  std::string state;
  std::string method;
  std::string config;
  std::string manifest;
  std::string out;
};

void ood_eval(const OodOptions& o) {
  auto cfg = run_config(o.config, std::nullopt);
  cfg.owl.scorer.method = parse_score_method(o.method);
  const auto state = load_state(o.state);
  const auto& clf = state.classifier();

  FittedScorer scorer;
  if (state.scorer.config.method == cfg.owl.scorer.method && o.manifest.empty()) {
    scorer = state.scorer;
  } else if (cfg.owl.scorer.method == ScoreMethod::Mds || cfg.owl.scorer.method == ScoreMethod::Vim ||
             cfg.owl.scorer.method == ScoreMethod::Knn) {
    require(!o.manifest.empty(), ErrorKind::Argument,
            "--method " + o.method + " differs from the state's scorer; pass --manifest to fit it");
    const auto m = load_manifest(o.manifest);
    scorer = fit_scorer(cfg.owl.scorer, load_labeled(m, SessionRole::BaseTrain, 0), clf);
  } else {
    scorer = logit_scorer(cfg.owl.scorer, clf.class_count(), clf.dim());
  }

  const auto id_scores = score_batch(scorer, clf, load_embeddings(o.id).to_matrix());
  std::string csv = "group,dataset,auroc,fpr95\n";
  std::map<std::string, std::vector<metrics::DetectionReport>> groups;
  const std::set<std::string> near(cfg.report.near.begin(), cfg.report.near.end());
  const std::set<std::string> far(cfg.report.far.begin(), cfg.report.far.end());
  for (const auto& path : o.ood) {
    const auto name = fs::path(path).stem().string();
    const auto scores = score_batch(scorer, clf, load_embeddings(path).to_matrix());
    const auto report = metrics::detection_report(id_scores, scores, cfg.report.tpr);
    const std::string group = near.contains(name) ? "near" : far.contains(name) ? "far" : "other";
    groups[group].push_back(report);
    csv += fmt::format("{},{},{},{}\n", group, name, pct(report.auroc), pct(report.fpr_at_tpr));
  }
  for (const char* group : {"near", "far"}) {
    const auto it = groups.find(group);
    if (it == groups.end()) continue;
    double auroc = 0, fpr = 0;
    for (const auto& r : it->second) {
      auroc += r.auroc;
      fpr += r.fpr_at_tpr;
    }
    const auto n = static_cast<double>(it->second.size());
    csv += fmt::format("{},average,{},{}\n", group, pct(auroc / n), pct(fpr / n));
  }
  emit(o.out, csv);
}

// ---- cil-run / fscil-run --------------------------------------------------

struct IncrementalOptions {
  std::string manifest;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int shots = 0;
};

// Accuracy on the test rows whose labels fall in [lo, hi).
double range_accuracy(const LabelVector& pred, const LabelVector& truth, Label lo, Label hi) {
  std::size_t n = 0, hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < lo || truth[i] >= hi) continue;
    ++n;
    hits += pred[i] == truth[i] ? 1 : 0;
  }
  return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

// Runs the session loop; `step` learns session t from its labeled training set.
template <typename Step, typename Predict>
void incremental_run(const Manifest& m, Learner learner, Step step, Predict predict_fn, const fs::path& out,
                     const std::string& summary_header, const std::string& summary_prefix) {
  std::vector<Label> task_end{static_cast<Label>(learner.classifier.class_count())};
  std::vector<std::vector<double>> acc;  // acc[t][j]
  std::vector<double> session_accs;
  std::string sessions_csv = "session,classes,accuracy\n";

  auto evaluate_session = [&](const EmbeddingSet& test, int t) {
    const auto pred = predict_fn(learner, test.to_matrix());
    std::vector<double> row;
    Label lo = 0;
    for (const auto hi : task_end) {
      row.push_back(range_accuracy(pred, *test.labels, lo, hi));
      lo = hi;
    }
    acc.push_back(row);
    const double overall = range_accuracy(pred, *test.labels, 0, task_end.back());
    session_accs.push_back(overall);
    sessions_csv += fmt::format("{},{},{}\n", t, learner.classifier.class_count(), pct(overall));
  };

  evaluate_session(load_labeled(m, SessionRole::BaseVal, 0), 0);
  for (int t = 1; t <= m.last_session(); ++t) {
    const auto train = load_labeled(m, SessionRole::SessionTrain, t);
    learner = step(learner, train, t);
    task_end.push_back(static_cast<Label>(learner.classifier.class_count()));
    evaluate_session(load_labeled(m, SessionRole::SessionTest, t), t);
    spdlog::info("session {}: {} classes, accuracy {}", t, learner.classifier.class_count(),
                 pct(session_accs.back()));
  }

  const auto T = static_cast<Eigen::Index>(acc.size());
  Matrix matrix = Matrix::Zero(T, T);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index j = 0; j <= t; ++j) matrix(t, j) = acc[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];

  make_dir(out);
  write_file(out / "sessions.csv", sessions_csv);
  std::string summary = summary_header + "\n" + summary_prefix + pct(session_accs.back()) + "," +
                        pct(metrics::avg_accuracy(session_accs));
  if (summary_prefix.empty()) summary += "," + pct(metrics::forgetting(matrix));
  write_file(out / "summary.csv", summary + "\n");
}

TrainConfig seeded(TrainConfig cfg, std::uint64_t seed, int session) {
  cfg.seed = rng::derive_key(seed, static_cast<std::uint64_t>(session));
  return cfg;
}

void cil_run(const IncrementalOptions& o) {
  const auto cfg = run_config(o.config, o.seed);
  const auto m = load_manifest(o.manifest);
  const auto& tc = cfg.owl.cil;
  const auto seed = cfg.owl.seed;
  auto learner = learn_base(load_labeled(m, SessionRole::BaseTrain, 0), seeded(tc, seed, 0));
  incremental_run(
      m, std::move(learner),
      [&](const Learner& prev, const EmbeddingSet& train, int t) {
        const auto s = split_by_label(train, static_cast<Label>(prev.classifier.class_count()));
        return learn_session(prev, s.new_X, s.new_y, seeded(tc, seed, t), &s.old_X, s.old_y);
      },
      [&](const Learner& l, const Matrix& X) { return predict(l, X, tc.strategy); }, o.out, "last,avg,forgetting",
      "");
}

void fscil_run(const IncrementalOptions& o) {
  require(o.shots >= 1, ErrorKind::Argument, "--shots must be at least 1");
  const auto cfg = run_config(o.config, o.seed);
  const auto m = load_manifest(o.manifest);
  Learner learner;
  learner.classifier = init_base(load_labeled(m, SessionRole::BaseTrain, 0), seeded(cfg.owl.cil, cfg.owl.seed, 0));
  const auto shots = static_cast<std::size_t>(o.shots);
  incremental_run(
      m, std::move(learner),
      [&](const Learner& prev, const EmbeddingSet& train, int) {
        IndexVector rows;
        const auto first = static_cast<Label>(prev.classifier.class_count());
        std::map<Label, std::size_t> taken;
        for (std::size_t i = 0; i < train.size(); ++i) {
          const Label y = (*train.labels)[i];
          if (y >= first && taken[y]++ < shots) rows.push_back(i);
        }
        for (const auto& [y, n] : taken) {
          require(n >= shots, ErrorKind::Data,
                  fmt::format("class {} has {} samples, fewer than {} shots", y, n, shots));
        }
        Learner next = prev;
        next.classifier = fscil_update(prev.classifier, train.subset(rows), shots);
        return next;
      },
      [](const Learner& l, const Matrix& X) { return ncm_predict(l.classifier, X); }, o.out, "shots,last,avg",
      std::to_string(o.shots) + ",");
}

// ---- ncd-eval -------------------------------------------------------------

struct NcdOptions {
  std::string features;
  std::string labels;
  std::optional<std::size_t> k;
  std::uint64_t seed = 0;
  std::string out;
};

void ncd_eval(const NcdOptions& o) {
  const auto set = load_embeddings(o.features, fs::path(o.labels));
  const auto found = discover(set, o.k, o.seed);
  const auto& truth = *set.labels;
  emit(o.out, fmt::format("k,nmi,purity,cluster_acc\n{},{},{},{}\n", found.k, pct(metrics::nmi(found.labels, truth)),
                          pct(metrics::purity(found.labels, truth)),
                          pct(metrics::cluster_accuracy(found.labels, truth))));
}

// ---- report ---------------------------------------------------------------

void report(const std::string& state_dir, const std::string& out) {
  std::ifstream in(fs::path(state_dir) / "logs.json", std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + (fs::path(state_dir) / "logs.json").string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto logs = logs_from_json(buffer.str());

  std::string csv = "session,classes,discovered,id_acc,ood_acc,accuracy,avg,cluster_acc,nmi\n";
  nlohmann::json x = nlohmann::json::array(), y = nlohmann::json::array(), avg = nlohmann::json::array();
  for (const auto& log : logs) {
    csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", log.session_index, log.class_count, log.discovered_k,
                       pct(log.id_acc), pct(log.ood_acc), pct(log.session_acc), pct(log.avg), pct(log.cluster_acc),
                       pct(log.nmi));
    x.push_back(log.session_index);
    y.push_back(metrics::round_half_up(log.session_acc * 100.0, 2));
    avg.push_back(metrics::round_half_up(log.avg * 100.0, 2));
  }
  make_dir(out);
  write_file(fs::path(out) / "sessions.csv", csv);
  const nlohmann::json plot = {{"x_label", "session"}, {"y_label", "accuracy (%)"}, {"x", x}, {"y", y}, {"avg", avg}};
  write_file(fs::path(out) / "plot.json", plot.dump(2) + "\n");
}

// ---- synth ----------------------------------------------------------------

struct SynthOptions {
  std::string out;
  synth::ScenarioSpec spec;
  std::vector<int> novel;
  double known_fraction = 0.5;
  int samples = 100;
};

void synth_cmd(SynthOptions o) {
  for (const int n : o.novel) o.spec.sessions.push_back({n, o.known_fraction, o.samples});
  const auto scenario = synth::generate(o.spec);
  synth::write_scenario(scenario, o.spec, o.out);
  spdlog::info("wrote {} classes over {} sessions to {}", o.spec.total_classes(), o.spec.sessions.size(), o.out);
}

// ---- sweep ----------------------------------------------------------------

struct SweepOptions {
  PipelineOptions pipeline;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
  std::string out;
};

int run_one_seed(const SweepOptions& o, std::uint64_t seed) {
  try {
    PipelineOptions p = o.pipeline;
    p.seed = seed;
    p.state = (fs::path(o.out) / fmt::format("seed_{}", seed)).string();
    fit_base(p);
    p.seed.reset();
    owl_run(p);
    return 0;
  } catch (const Error& e) {
    spdlog::error("seed {}: {}", seed, e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("seed {}: {}", seed, e.what());
    return 3;
  }
}

int sweep(const SweepOptions& o) {
  require(!o.seeds.empty(), ErrorKind::Argument, "--seeds needs at least one seed");
  require(o.jobs >= 1, ErrorKind::Argument, "--jobs must be at least 1");
  run_config(o.pipeline.config, std::nullopt);  // fail fast on a bad config
  make_dir(o.out);
  std::cout.flush();

  int worst = 0;
  std::map<pid_t, std::uint64_t> running;
  auto reap = [&] {
    int status = 0;
    const pid_t pid = ::wait(&status);
    if (pid <= 0) return;
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 3;
    if (code != 0) spdlog::error("seed {} failed with exit code {}", running[pid], code);
    worst = std::max(worst, code);
    running.erase(pid);
  };
  for (const auto seed : o.seeds) {
    while (static_cast<int>(running.size()) >= o.jobs) reap();
    const pid_t pid = ::fork();
    require(pid >= 0, ErrorKind::Io, "fork failed");
    if (pid == 0) ::_exit(run_one_seed(o, seed));
    running[pid] = seed;
  }
  while (!running.empty()) reap();
  if (worst != 0) return worst;

  std::string csv = "seed,sessions,last,avg\n";
  for (const auto seed : o.seeds) {
    const auto state = load_state(fs::path(o.out) / fmt::format("seed_{}", seed));
    const auto& last = state.session_logs.back();
    csv += fmt::format("{},{},{},{}\n", seed, state.session_logs.size(), pct(last.session_acc), pct(last.avg));
  }
  write_file(fs::path(o.out) / "summary.csv", csv);
  return 0;
}

} // namespace

int run(int argc, const char* const* argv) {
  setup_logging();
  CLI::App app{"owlkit: open-world learning over embeddings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "owlkit 0.1.0");

  PipelineOptions base_opts, owl_opts;
  auto* fit = app.add_subcommand("fit-base", "Learn base classes and fit the OOD scorer");
  fit->add_option("--manifest", base_opts.manifest, "manifest.json")->required();
  fit->add_option("--config", base_opts.config, "TOML run configuration");
  fit->add_option("--out", base_opts.state, "state directory to write")->required();
  fit->add_option("--seed", base_opts.seed, "overrides [owl] seed");

  auto* owl = app.add_subcommand("owl-run", "Run open sessions from the manifest on a saved state");
  owl->add_option("--manifest", owl_opts.manifest, "manifest.json")->required();
  owl->add_option("--config", owl_opts.config, "TOML run configuration");
  owl->add_option("--state", owl_opts.state, "state directory (updated in place)")->required();
  owl->add_option("--sessions", owl_opts.sessions, "run at most N sessions")->check(CLI::NonNegativeNumber);
  owl->add_option("--seed", owl_opts.seed, "overrides the state's seed");

  OodOptions ood_opts;
  auto* ood = app.add_subcommand("ood-eval", "Detection metrics of one ID file against OOD files");
  ood->add_option("--id", ood_opts.id, "in-distribution features (.npy)")->required();
  ood->add_option("--ood", ood_opts.ood, "OOD feature files (.npy)")->required();
  ood->add_option("--state", ood_opts.state, "state directory")->required();
  ood->add_option("--method", ood_opts.method, "msp, mls, energy, tsoftmax, mds, vim or knn")->required();
  ood->add_option("--config", ood_opts.config, "TOML run configuration ([scorer], [report])");
  ood->add_option("--manifest", ood_opts.manifest, "fit the scorer on this manifest's base-train");
  ood->add_option("--out", ood_opts.out, "CSV path (stdout when absent)");

  IncrementalOptions cil_opts, fscil_opts;
  auto* cil = app.add_subcommand("cil-run", "Supervised class-incremental run");
  cil->add_option("--manifest", cil_opts.manifest, "manifest.json")->required();
  cil->add_option("--config", cil_opts.config, "TOML run configuration");
  cil->add_option("--out", cil_opts.out, "output directory")->required();
  cil->add_option("--seed", cil_opts.seed, "overrides [owl] seed");

  auto* fscil = app.add_subcommand("fscil-run", "Few-shot class-incremental run with prototype extension");
  fscil->add_option("--manifest", fscil_opts.manifest, "manifest.json")->required();
  fscil->add_option("--config", fscil_opts.config, "TOML run configuration");
  fscil->add_option("--out", fscil_opts.out, "output directory")->required();
  fscil->add_option("--shots", fscil_opts.shots, "samples per novel class")->required();
  fscil->add_option("--seed", fscil_opts.seed, "overrides [owl] seed");

  NcdOptions ncd_opts;
  auto* ncd = app.add_subcommand("ncd-eval", "Cluster labeled features and score the partition");
  ncd->add_option("--features", ncd_opts.features, "features (.npy)")->required();
  ncd->add_option("--labels", ncd_opts.labels, "ground-truth labels (.npy)")->required();
  ncd->add_option("--k", ncd_opts.k, "cluster count (estimated when absent)")->check(CLI::PositiveNumber);
  ncd->add_option("--seed", ncd_opts.seed, "clustering seed");
  ncd->add_option("--out", ncd_opts.out, "CSV path (stdout when absent)");

  std::string report_state, report_out;
  auto* rep = app.add_subcommand("report", "Per-session CSV and plot data from a state's logs");
  rep->add_option("--state", report_state, "state directory")->required();
  rep->add_option("--out", report_out, "output directory")->required();

  SynthOptions synth_opts;
  auto* syn = app.add_subcommand("synth", "Write a synthetic open-world scenario");
  syn->add_option("--out", synth_opts.out, "output directory")->required();
  syn->add_option("--dim", synth_opts.spec.dim, "feature dimension")->capture_default_str();
  syn->add_option("--base-classes", synth_opts.spec.base_classes, "base classes")->capture_default_str();
  syn->add_option("--novel", synth_opts.novel, "novel classes per session (repeat per session)");
  syn->add_option("--known-fraction", synth_opts.known_fraction, "known share of session samples")
      ->capture_default_str();
  syn->add_option("--samples", synth_opts.samples, "samples per novel class")->capture_default_str();
  syn->add_option("--base-samples", synth_opts.spec.base_samples_per_class, "training samples per base class")
      ->capture_default_str();
  syn->add_option("--test-samples", synth_opts.spec.test_samples_per_class, "test samples per class")
      ->capture_default_str();
  syn->add_option("--separation", synth_opts.spec.separation, "minimum center distance in sigmas")
      ->capture_default_str();
  syn->add_option("--sigma", synth_opts.spec.sigma, "noise scale")->capture_default_str();
  syn->add_option("--seed", synth_opts.spec.seed, "generator seed")->capture_default_str();

  SweepOptions sweep_opts;
  auto* swp = app.add_subcommand("sweep", "fit-base + owl-run for several seeds in parallel processes");
  swp->add_option("--manifest", sweep_opts.pipeline.manifest, "manifest.json")->required();
  swp->add_option("--config", sweep_opts.pipeline.config, "TOML run configuration");
  swp->add_option("--out", sweep_opts.out, "output directory (one state per seed)")->required();
  swp->add_option("--seeds", sweep_opts.seeds, "seeds to run")->required()->delimiter(',');
  swp->add_option("--jobs", sweep_opts.jobs, "parallel processes")->capture_default_str();
  swp->add_option("--sessions", sweep_opts.pipeline.sessions, "run at most N sessions per seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit) fit_base(base_opts);
    if (*owl) owl_run(owl_opts);
    if (*ood) ood_eval(ood_opts);
    if (*cil) cil_run(cil_opts);
    if (*fscil) fscil_run(fscil_opts);
    if (*ncd) ncd_eval(ncd_opts);
    if (*rep) report(report_state, report_out);
    if (*syn) synth_cmd(synth_opts);
    if (*swp) return sweep(sweep_opts);
  } catch (const Error& e) {
    std::cerr << "owlkit: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "owlkit: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace owlkit::cli
