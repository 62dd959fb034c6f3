#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "owlkit/assignment.hpp"
#include "owlkit/kmeans.hpp"
#include "owlkit/metrics.hpp"
#include "owlkit/owl.hpp"
#include "owlkit/scorer.hpp"
#include "owlkit/strategies.hpp"
#include "owlkit/synth.hpp"

namespace {

using namespace owlkit;

synth::Scenario scenario(int dim, int classes, int per_class) {
  synth::ScenarioSpec spec;
  spec.dim = dim;
  spec.base_classes = classes;
  spec.base_samples_per_class = per_class;
  spec.test_samples_per_class = 10;
  spec.sessions.push_back({3, 0.5, per_class});
  spec.seed = 11;
  return synth::generate(spec);
}

void BM_Kmeans(benchmark::State& st) {
  const auto sc = scenario(32, static_cast<int>(st.range(1)), static_cast<int>(st.range(0)));
  const Matrix X = sc.base_train.to_matrix();
  for (auto _ : st) benchmark::DoNotOptimize(kmeans(X, static_cast<std::size_t>(st.range(1))));
  st.SetItemsProcessed(st.iterations() * X.rows());
}
BENCHMARK(BM_Kmeans)->Args({100, 5})->Args({400, 10});

void BM_Hungarian(benchmark::State& st) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = st.range(0);
  Matrix cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = u(gen);
  for (auto _ : st) benchmark::DoNotOptimize(hungarian(cost));
}
BENCHMARK(BM_Hungarian)->Arg(16)->Arg(128);

void BM_Auroc(benchmark::State& st) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> id(st.range(0)), ood(st.range(0));
  for (auto& v : id) v = n01(gen) + 1.0;
  for (auto& v : ood) v = n01(gen);
  for (auto _ : st) benchmark::DoNotOptimize(metrics::auroc(id, ood));
  st.SetItemsProcessed(st.iterations() * 2 * st.range(0));
}
BENCHMARK(BM_Auroc)->Arg(1 << 10)->Arg(1 << 16);

void BM_ScoreBatch(benchmark::State& st) {
  const auto sc = scenario(64, 10, 200);
  TrainConfig tc;
  tc.epochs = 5;
  const auto clf = init_base(sc.base_train, tc);
  ScorerConfig cfg;
  cfg.method = static_cast<ScoreMethod>(st.range(0));
  const auto scorer = (cfg.method == ScoreMethod::Mds || cfg.method == ScoreMethod::Vim ||
                       cfg.method == ScoreMethod::Knn)
                          ? fit_scorer(cfg, sc.base_train, clf)
                          : logit_scorer(cfg, clf.class_count(), sc.base_train.dim());
  const Matrix X = sc.sessions[0].train.to_matrix();
  st.SetLabel(std::string(to_string(cfg.method)));
  for (auto _ : st) benchmark::DoNotOptimize(score_batch(scorer, clf, X));
  st.SetItemsProcessed(st.iterations() * X.rows());
}
BENCHMARK(BM_ScoreBatch)->DenseRange(0, static_cast<int>(ScoreMethod::Knn));

void BM_LearnBase(benchmark::State& st) {
  const auto sc = scenario(32, 10, 100);
  TrainConfig tc;
  tc.strategy = static_cast<Strategy>(st.range(0));
  tc.epochs = 10;
  st.SetLabel(std::string(to_string(tc.strategy)));
  for (auto _ : st) benchmark::DoNotOptimize(learn_base(sc.base_train, tc));
}
BENCHMARK(BM_LearnBase)->Arg(static_cast<int>(Strategy::Finetune))->Arg(static_cast<int>(Strategy::Icarl));

void BM_OpenSession(benchmark::State& st) {
  const auto sc = scenario(32, 5, 100);
  OwlConfig cfg;
  cfg.cil.epochs = 10;
  const auto base = run_base(sc.base_train, sc.base_val, cfg);
  for (auto _ : st)
    benchmark::DoNotOptimize(run_open_session(base, sc.sessions[0].train, sc.sessions[0].test, cfg));
}
BENCHMARK(BM_OpenSession)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
