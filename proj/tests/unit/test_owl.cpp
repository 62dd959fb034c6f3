#include <numeric>

#include "oracles.hpp"
#include "owlkit/error.hpp"
#include "owlkit/metrics.hpp"
#include "owlkit/owl.hpp"
#include "owlkit/rng.hpp"
#include "owlkit/state.hpp"
#include "owlkit/synth.hpp"
#include "support.hpp"

namespace owlkit {
namespace {

synth::ScenarioSpec spec_with(std::vector<synth::SessionSpec> sessions, std::uint64_t seed = 7) {
  synth::ScenarioSpec spec;
  spec.sessions = std::move(sessions);
  spec.seed = seed;
  return spec;
}

OwlConfig owl_config(std::uint64_t seed = 7) {
  OwlConfig cfg;
  cfg.seed = seed;
  return cfg;
}

struct Run {
  synth::Scenario scenario;
  PipelineState base;
  std::vector<PipelineState> states;
  std::vector<SessionOutcome> outcomes;
};

Run run_all(const synth::ScenarioSpec& spec, const OwlConfig& cfg) {
  Run r{synth::generate(spec), {}, {}, {}};
  r.base = run_base(r.scenario.base_train, r.scenario.base_val, cfg);
  PipelineState state = r.base;
  for (const auto& s : r.scenario.sessions) {
    auto [next, outcome] = run_open_session(state, s.train, s.test, cfg);
    state = next;
    r.states.push_back(next);
    r.outcomes.push_back(outcome);
  }
  return r;
}

// ---- base -----------------------------------------------------------------

TEST(Base, RegistryThresholdAndAccuracy) {
  const auto scenario = synth::generate(spec_with({}));
  const auto state = run_base(scenario.base_train, scenario.base_val, owl_config());
  EXPECT_EQ(state.registry.size(), 5u);
  EXPECT_TRUE(state.scorer.calibrated);
  for (const auto& e : state.registry.entries()) {
    EXPECT_FALSE(e.discovered);
    EXPECT_EQ(e.origin_session, 0);
  }
  // Calibrated on base-val: the realized TPR reaches the target.
  const auto scores = score_batch(state.scorer, state.classifier(), scenario.base_val.to_matrix());
  const auto kept = std::count_if(scores.begin(), scores.end(), [&](double s) { return s >= state.scorer.threshold; });
  EXPECT_GE(static_cast<double>(kept) / static_cast<double>(scores.size()), 0.95);
  ASSERT_EQ(state.session_logs.size(), 1u);
  EXPECT_GE(state.session_logs[0].session_acc, 0.95);
  EXPECT_NO_THROW(state.validate());
}

TEST(Base, RejectsBadConfig) {
  auto cfg = owl_config();
  for (const double tpr : {0.0, 1.0, -0.2}) {
    cfg.target_tpr = tpr;
    EXPECT_OWL_ERROR(cfg.validate(), ErrorKind::Config);
  }
}

// ---- open sessions --------------------------------------------------------

TEST(Session, DiscoversNovelClasses) {
  const auto r = run_all(spec_with({{3, 0.5, 100}}), owl_config());
  const auto& o = r.outcomes[0];
  EXPECT_EQ(o.discovered_k, 3u);
  EXPECT_EQ(o.new_class_ids, (LabelVector{5, 6, 7}));
  EXPECT_EQ(r.states[0].registry.size(), 8u);
  EXPECT_GE(o.log.session_acc, 0.95);
  for (Label c = 5; c < 8; ++c) {
    EXPECT_TRUE(r.states[0].registry.at(c).discovered);
    EXPECT_EQ(r.states[0].registry.at(c).origin_session, 1);
  }
}

TEST(Session, AllKnownInputsAddNothing) {
  const auto scenario = synth::generate(spec_with({}));
  const auto cfg = owl_config();
  const auto state = run_base(scenario.base_train, scenario.base_val, cfg);
  // Inputs at the class centers are as in-distribution as it gets.
  EmbeddingSet centers = EmbeddingSet::from_matrix(scenario.centers.topRows(5), LabelVector{0, 1, 2, 3, 4});
  const auto [next, outcome] = run_open_session(state, centers, scenario.base_val, cfg);
  EXPECT_EQ(outcome.n_flagged_ood, 0u);
  EXPECT_EQ(outcome.discovered_k, 0u);
  EXPECT_EQ(next.learner, state.learner);
  EXPECT_EQ(next.registry, state.registry);
  EXPECT_EQ(next.session_logs.size(), 2u);
}

TEST(Session, ConsecutiveSessionsUseFreshIds) {
  const auto r = run_all(spec_with({{2, 0.5, 80}, {2, 0.5, 80}}), owl_config());
  Label last = 4;
  for (const auto& o : r.outcomes) {
    EXPECT_LE(o.n_flagged_ood, o.n_input);
    EXPECT_EQ(o.discovered_k, o.new_class_ids.size());
    for (const auto id : o.new_class_ids) EXPECT_GT(id, last), last = id;
  }
  // The registry only grows; earlier entries never change provenance.
  const auto& before = r.states[0].registry.entries();
  const auto& after = r.states[1].registry.entries();
  ASSERT_GE(after.size(), before.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(after[i].class_id, before[i].class_id);
    EXPECT_EQ(after[i].origin_session, before[i].origin_session);
    EXPECT_EQ(after[i].discovered, before[i].discovered);
  }
}

TEST(Session, ConservationAndLoggedAverage) {
  const auto r = run_all(spec_with({{2, 0.4, 60}, {1, 0.6, 60}, {0, 0.5, 30}}), owl_config(3));
  const auto& logs = r.states.back().session_logs;
  ASSERT_EQ(logs.size(), 4u);
  std::vector<double> accs;
  for (std::size_t t = 0; t < logs.size(); ++t) {
    EXPECT_EQ(logs[t].session_index, static_cast<int>(t));
    accs.push_back(logs[t].session_acc);
    EXPECT_NEAR(logs[t].avg, metrics::avg_accuracy(accs), 1e-12);
  }
  for (std::size_t t = 0; t < r.outcomes.size(); ++t) {
    const auto& o = r.outcomes[t];
    const auto& s = r.scenario.sessions[t];
    const auto scores = score_batch(t == 0 ? r.base.scorer : r.states[t - 1].scorer,
                                    (t == 0 ? r.base : r.states[t - 1]).classifier(), s.train.to_matrix());
    const auto split = split_by_threshold(scores, (t == 0 ? r.base : r.states[t - 1]).scorer.threshold);
    EXPECT_EQ(o.n_input, split.id_indices.size() + split.ood_indices.size());
    EXPECT_EQ(o.n_flagged_ood, split.ood_indices.size());
  }
}

TEST(Session, DeterministicLogs) {
  const auto spec = spec_with({{2, 0.5, 60}, {2, 0.5, 60}}, 19);
  const auto a = run_all(spec, owl_config(5)), b = run_all(spec, owl_config(5));
  EXPECT_EQ(logs_to_json(a.states.back().session_logs), logs_to_json(b.states.back().session_logs));
  EXPECT_EQ(a.states.back(), b.states.back());
}

TEST(Session, AlternativeStrategiesAndScorers) {
  const auto spec = spec_with({{2, 0.5, 80}}, 11);
  for (const auto strategy : {Strategy::Finetune, Strategy::Lwf, Strategy::Ewc, Strategy::Ncm}) {
    for (const auto method : {ScoreMethod::Mds, ScoreMethod::Knn, ScoreMethod::Vim}) {
      auto cfg = owl_config();
      cfg.cil.strategy = strategy;
      cfg.cil.epochs = 10;
      cfg.scorer.method = method;
      cfg.full_refit = method == ScoreMethod::Vim;
      cfg.include_pseudo_id = strategy == Strategy::Finetune;
      const auto r = run_all(spec, cfg);
      EXPECT_NO_THROW(r.states.back().validate());
      EXPECT_EQ(r.outcomes[0].discovered_k, r.outcomes[0].new_class_ids.size());
    }
  }
}

TEST(Session, GivenClusterCount) {
  auto cfg = owl_config();
  cfg.ncd_k = 2;
  const auto r = run_all(spec_with({{2, 0.5, 100}}), cfg);
  EXPECT_LE(r.outcomes[0].discovered_k, 2u);
}

// ---- evaluation -----------------------------------------------------------

TEST(Evaluate, TableAveragesFromLogs) {
  const auto scenario = synth::generate(spec_with({}));
  auto state = run_base(scenario.base_train, scenario.base_val, owl_config());
  state.session_logs[0].session_acc = 0.9127;
  SessionLog next;
  next.session_index = 1;
  next.session_acc = 0.5029;
  state.session_logs.push_back(next);
  const auto log = evaluate(state, scenario.base_val, Strategy::Icarl);
  EXPECT_EQ(log.session_index, 2);
  std::vector<double> accs{0.9127, 0.5029, log.session_acc};
  EXPECT_NEAR(log.avg, metrics::avg_accuracy(accs), 1e-12);
  EXPECT_EQ(metrics::round_half_up(metrics::avg_accuracy(std::vector<double>{91.27, 50.29}), 2), 70.78);
}

TEST(Evaluate, IdAndOodAccuracyDefinitions) {
  const auto r = run_all(spec_with({{3, 0.5, 100}}), owl_config());
  // Before the update the novel test classes are unknown to the base state.
  const auto& test = r.scenario.sessions[0].test;
  const auto split = evaluate_split(r.base, test, Strategy::Icarl);
  const auto scores = score_batch(r.base.scorer, r.base.classifier(), test.to_matrix());
  const auto pred = predict(r.base.learner, test.to_matrix(), Strategy::Icarl);
  std::size_t known = 0, known_ok = 0, unknown = 0, rejected = 0, correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Label y = (*test.labels)[i];
    if (y < 5) {
      ++known;
      correct += pred[i] == y;
      known_ok += scores[i] >= r.base.scorer.threshold && pred[i] == y;
    } else {
      ++unknown;
      rejected += scores[i] < r.base.scorer.threshold;
    }
  }
  EXPECT_EQ(split.n_known, known);
  EXPECT_EQ(split.n_unknown, unknown);
  EXPECT_DOUBLE_EQ(*split.id_acc, double(known_ok) / double(known));
  EXPECT_DOUBLE_EQ(*split.ood_acc, double(rejected) / double(unknown));
  EXPECT_DOUBLE_EQ(split.seen_acc, double(correct) / double(known));
}

// ---- small clusters -------------------------------------------------------

TEST(MergeSmall, ReassignsToNearestLargeCluster) {
  Matrix X(6, 1);
  X << 0, 0.1, 0.2, 10, 10.1, 9.0;
  LabelVector labels{0, 0, 0, 1, 1, 2};
  EXPECT_EQ(merge_small_clusters(X, labels, 3, 2), 2u);
  EXPECT_EQ(labels, (LabelVector{0, 0, 0, 1, 1, 1}));

  LabelVector singles{0, 1, 2};
  EXPECT_EQ(merge_small_clusters(X.topRows(3), singles, 3, 2), 0u);
  EXPECT_EQ(singles, LabelVector(3, -1));
}

TEST(MergeSmall, PropertySizesAndDensity) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + gen() % 6;
    const Matrix X = test::random_matrix(gen, 4 + static_cast<Eigen::Index>(gen() % 20), 2);
    auto labels = test::random_labels(gen, static_cast<std::size_t>(X.rows()), static_cast<Label>(k));
    const auto kept = merge_small_clusters(X, labels, k, 2);
    if (kept == 0) continue;
    std::map<Label, int> sizes;
    for (const auto v : labels) ++sizes[v];
    EXPECT_EQ(sizes.size(), kept);
    EXPECT_EQ(sizes.rbegin()->first, static_cast<Label>(kept) - 1);
    for (const auto& [c, n] : sizes) EXPECT_GE(n, 2);
  }
}

// ---- synth ----------------------------------------------------------------

TEST(Synth, ZeroNoisePutsSamplesOnCenters) {
  synth::ScenarioSpec spec;
  spec.base_classes = 2;
  spec.base_samples_per_class = 1;
  spec.test_samples_per_class = 1;
  spec.sigma = 1e-12;
  spec.separation = 8e12;  // keeps the center spacing at 8 in absolute units
  const auto s = synth::generate(spec);
  const Matrix X = s.base_train.to_matrix();
  for (Eigen::Index i = 0; i < 2; ++i) {
    const auto c = (*s.base_train.labels)[static_cast<std::size_t>(i)];
    EXPECT_LE((X.row(i) - s.centers.row(c)).cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_GE((s.centers.row(0) - s.centers.row(1)).norm(), 8.0 - 1e-9);
}

TEST(Synth, CountsAndSeparation) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    synth::ScenarioSpec spec;
    spec.dim = 6 + static_cast<int>(gen() % 12);
    spec.base_classes = 2 + static_cast<int>(gen() % 4);
    spec.base_samples_per_class = 1 + static_cast<int>(gen() % 20);
    spec.test_samples_per_class = 1 + static_cast<int>(gen() % 10);
    spec.seed = gen();
    const int sessions = static_cast<int>(gen() % 3);
    for (int t = 0; t < sessions; ++t)
      spec.sessions.push_back({static_cast<int>(gen() % 3), 0.1 * static_cast<double>(gen() % 10),
                               1 + static_cast<int>(gen() % 15)});
    const auto s = synth::generate(spec);
    const auto C = spec.total_classes();
    for (int a = 0; a < C; ++a)
      for (int b = a + 1; b < C; ++b)
        EXPECT_GE((s.centers.row(a) - s.centers.row(b)).norm(), spec.separation * spec.sigma - 1e-9);
    std::map<Label, int> base;
    for (const auto y : *s.base_train.labels) ++base[y];
    EXPECT_EQ(base.size(), static_cast<std::size_t>(spec.base_classes));
    for (const auto& [c, n] : base) EXPECT_EQ(n, spec.base_samples_per_class);
    int seen = spec.base_classes;
    for (std::size_t t = 0; t < spec.sessions.size(); ++t) {
      const auto& ss = spec.sessions[t];
      const auto& data = s.sessions[t];
      std::size_t novel = 0, known = 0;
      for (const auto y : *data.train.labels) (y >= seen ? novel : known)++;
      if (ss.novel_classes > 0) {
        EXPECT_EQ(novel, static_cast<std::size_t>(ss.novel_classes * ss.samples_per_class));
        // Known share = round_half_up(f * N) of the session total N.
        const double N = static_cast<double>(novel + known);
        EXPECT_EQ(static_cast<double>(known), std::floor(ss.known_fraction * N + 0.5)) << trial;
      } else {
        EXPECT_EQ(known, static_cast<std::size_t>(seen * ss.samples_per_class));
      }
      seen += ss.novel_classes;
      std::set<Label> test_classes(data.test.labels->begin(), data.test.labels->end());
      EXPECT_EQ(test_classes.size(), static_cast<std::size_t>(seen));
    }
  }
}

TEST(Synth, KnownSampleCountExamples) {
  EXPECT_EQ(synth::known_sample_count(300, 0.5), 300u);
  EXPECT_EQ(synth::known_sample_count(100, 0.0), 0u);
  EXPECT_EQ(synth::known_sample_count(100, 0.2), 25u);
}

TEST(Synth, BitDeterministicAndSeedSensitive) {
  const auto spec = spec_with({{2, 0.5, 20}}, 99);
  const auto a = synth::generate(spec), b = synth::generate(spec);
  EXPECT_EQ(a.base_train, b.base_train);
  EXPECT_EQ(a.sessions[0].train, b.sessions[0].train);
  EXPECT_EQ(a.centers, b.centers);
  const auto c = synth::generate(spec_with({{2, 0.5, 20}}, 100));
  EXPECT_FALSE(a.base_train == c.base_train);
}

TEST(Synth, NcmIsNearBayesOptimal) {
  const auto s = synth::generate(spec_with({}, 3));
  // Two centers 8 sigma apart: pairwise Bayes error is the tail beyond 4 sigma.
  EXPECT_LE(4 * oracle::normal_tail(4.0), 1e-3);
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto clf = init_base(s.base_train, cfg);
  EXPECT_GE(metrics::accuracy(ncm_predict(clf, s.base_val.to_matrix()), *s.base_val.labels), 0.99);
}

TEST(Synth, InvalidSpecs) {
  synth::ScenarioSpec spec;
  spec.base_classes = 1;
  EXPECT_OWL_ERROR(spec.validate(), ErrorKind::Argument);
  spec = {};
  spec.separation = 0;
  EXPECT_OWL_ERROR(spec.validate(), ErrorKind::Argument);
  spec = {};
  spec.sessions = {{1, 1.5, 10}};
  EXPECT_OWL_ERROR(spec.validate(), ErrorKind::Argument);
  spec = {};
  spec.dim = 3;
  spec.base_classes = 40;
  EXPECT_OWL_ERROR(synth::generate(spec), ErrorKind::Argument);
}

TEST(Synth, WrittenFilesLoadBack) {
  const auto spec = spec_with({{2, 0.5, 10}}, 4);
  const auto s = synth::generate(spec);
  const auto dir = test::scratch_dir();
  const auto m = synth::write_scenario(s, spec, dir);
  const auto back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(back.sessions, m.sessions);
  EXPECT_FALSE(back.find(SessionRole::SessionTrain, 1)->labeled);
  EXPECT_EQ(back.load(*back.find(SessionRole::SessionTrain, 1)), s.sessions[0].train);
  EXPECT_EQ(back.load(*back.find(SessionRole::BaseTrain, 0)), s.base_train);
}

// ---- rng ------------------------------------------------------------------

TEST(Rng, KnownSplitMixValues) {
  // Reference SplitMix64 outputs for state 0: the first draw mixes 0 + golden.
  EXPECT_EQ(rng::draw(0, 0), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng::draw(0, 1), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng::draw(0, 2), 0x06C45D188009454FULL);
}

TEST(Rng, StreamProperties) {
  CounterStream s(rng::derive_key(42, 1));
  std::vector<int> hist(10, 0);
  double sum = 0, sq = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto b = s.next_below(10);
    ASSERT_LT(b, 10u);
    ++hist[b];
    const double u = s.next_unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = s.next_normal();
    sum += z;
    sq += z * z;
  }
  for (const int h : hist) EXPECT_NEAR(h, 10000, 500);
  EXPECT_NEAR(sum / 1e5, 0.0, 0.02);
  EXPECT_NEAR(sq / 1e5, 1.0, 0.02);
  EXPECT_NE(rng::derive_key(42, 1), rng::derive_key(42, 2));
}

} // namespace
} // namespace owlkit
