#include "owlkit/owl.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>

#include "owlkit/error.hpp"
#include "owlkit/kmeans.hpp"
#include "owlkit/metrics.hpp"
#include "owlkit/rng.hpp"

namespace owlkit {

void OwlConfig::validate() const {
  scorer.validate();
  cil.validate();
  require(target_tpr > 0.0 && target_tpr < 1.0, ErrorKind::Config, "target_tpr must lie in (0, 1)");
  require(!ncd_k || *ncd_k >= 1, ErrorKind::Config, "ncd_k must be at least 1");
}

namespace {

enum : std::uint64_t { kTrainTag = 1, kClusterTag = 2 };

std::uint64_t session_key(std::uint64_t seed, int session_index, std::uint64_t tag) {
  return rng::derive_key(rng::derive_key(seed, static_cast<std::uint64_t>(session_index)), tag);
}

std::set<Label> known_truths(const ClassRegistry& registry) {
  std::set<Label> out;
  for (const auto& e : registry.entries()) {
    if (e.true_label >= 0) out.insert(e.true_label);
  }
  return out;
}

double mean_session_acc(const std::vector<SessionLog>& logs, double current) {
  std::vector<double> accs;
  for (const auto& log : logs) accs.push_back(log.session_acc);
  accs.push_back(current);
  return metrics::avg_accuracy(accs);
}

} // namespace

std::size_t merge_small_clusters(const Matrix& X, LabelVector& labels, std::size_t k, std::size_t min_size) {
  require(X.rows() == static_cast<Eigen::Index>(labels.size()), ErrorKind::Shape,
          "cluster labels and rows differ in length");
  std::vector<std::size_t> counts(k, 0);
  for (const auto l : labels) ++counts[static_cast<std::size_t>(l)];
  std::vector<Label> large;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] >= min_size) large.push_back(static_cast<Label>(c));
  }
  if (large.empty()) {
    std::fill(labels.begin(), labels.end(), kUnlabeled);
    return 0;
  }

  Matrix centroids = Matrix::Zero(static_cast<Eigen::Index>(k), X.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) centroids.row(labels[i]) += X.row(static_cast<Eigen::Index>(i));
  for (const auto c : large) centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (counts[static_cast<std::size_t>(labels[i])] >= min_size) continue;
    double best = std::numeric_limits<double>::infinity();
    Label target = large.front();
    for (const auto c : large) {
      const double d = (X.row(static_cast<Eigen::Index>(i)) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        target = c;
      }
    }
    labels[i] = target;
  }

  std::vector<Label> remap(k, kUnlabeled);
  for (std::size_t r = 0; r < large.size(); ++r) remap[static_cast<std::size_t>(large[r])] = static_cast<Label>(r);
  for (auto& l : labels) l = remap[static_cast<std::size_t>(l)];
  return large.size();
}

EvalSplit evaluate_split(const PipelineState& state, const EmbeddingSet& eval_test, Strategy strategy) {
  require(eval_test.labeled(), ErrorKind::Data, "evaluation data must be labeled");
  require(eval_test.dim() == state.classifier().dim(), ErrorKind::Shape,
          "evaluation features have width " + std::to_string(eval_test.dim()) + ", model expects " +
              std::to_string(state.classifier().dim()));
  const Matrix X = eval_test.to_matrix();
  const auto pred = predict(state.learner, X, strategy);
  const auto scores = score_batch(state.scorer, state.classifier(), X);
  const auto known = known_truths(state.registry);
  const auto& truth = *eval_test.labels;

  EvalSplit out;
  std::size_t accepted_correct = 0, correct = 0, rejected = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0) continue;
    const bool accepted = scores[i] >= state.scorer.threshold;
    if (known.contains(truth[i])) {
      ++out.n_known;
      const bool hit = state.registry.at(pred[i]).true_label == truth[i];
      correct += hit ? 1 : 0;
      accepted_correct += (hit && accepted) ? 1 : 0;
    } else {
      ++out.n_unknown;
      rejected += accepted ? 0 : 1;
    }
  }
  if (out.n_known > 0) {
    out.id_acc = static_cast<double>(accepted_correct) / static_cast<double>(out.n_known);
    out.seen_acc = static_cast<double>(correct) / static_cast<double>(out.n_known);
  }
  if (out.n_unknown > 0) out.ood_acc = static_cast<double>(rejected) / static_cast<double>(out.n_unknown);
  return out;
}

SessionLog evaluate(PipelineState& state, const EmbeddingSet& eval_test, Strategy strategy) {
  const auto split = evaluate_split(state, eval_test, strategy);
  SessionLog log;
  log.session_index = static_cast<int>(state.session_logs.size());
  log.class_count = state.registry.size();
  log.threshold = state.scorer.threshold;
  log.id_acc = split.id_acc;
  log.ood_acc = split.ood_acc;
  log.session_acc = split.seen_acc;
  log.avg = mean_session_acc(state.session_logs, log.session_acc);
  state.session_logs.push_back(log);
  return log;
}

PipelineState run_base(const EmbeddingSet& train, const EmbeddingSet& val, const OwlConfig& cfg) {
  cfg.validate();
  TrainConfig cil = cfg.cil;
  cil.seed = session_key(cfg.seed, 0, kTrainTag);

  PipelineState state;
  state.rng_seed = cfg.seed;
  state.learner = learn_base(train, cil);
  const auto& clf = state.learner.classifier;
  // Calibrated on base-val so its TPR at tau meets the target exactly.
  state.scorer = with_calibration_set(fit_scorer(cfg.scorer, train, clf), clf, val.to_matrix());
  calibrate_threshold(state.scorer, cfg.target_tpr);

  std::vector<std::int64_t> counts(clf.class_count(), 0);
  for (const auto label : *train.labels) ++counts[static_cast<std::size_t>(label)];
  for (std::size_t c = 0; c < clf.class_count(); ++c) {
    state.registry.add(0, false, clf.prototypes.row(static_cast<Eigen::Index>(c)).transpose(), counts[c],
                       static_cast<Label>(c));
  }

  evaluate(state, val, cfg.cil.strategy);
  state.session_logs.back().n_input = train.size();
  return state;
}

std::pair<PipelineState, SessionOutcome> run_open_session(const PipelineState& state,
                                                          const EmbeddingSet& unlabeled,
                                                          const EmbeddingSet& eval_test,
                                                          const OwlConfig& cfg) {
  cfg.validate();
  require(!state.session_logs.empty(), ErrorKind::State, "open sessions need a base state");
  require(unlabeled.dim() == state.classifier().dim(), ErrorKind::Shape,
          "session features have width " + std::to_string(unlabeled.dim()) + ", model expects " +
              std::to_string(state.classifier().dim()));
  const int session = static_cast<int>(state.session_logs.size());
  const auto known_before = known_truths(state.registry);
  const auto before = evaluate_split(state, eval_test, cfg.cil.strategy);

  // (1)-(2) score and split
  const Matrix X = unlabeled.to_matrix();
  const auto scores = score_batch(state.scorer, state.classifier(), X);
  const auto split = split_by_threshold(scores, state.scorer.threshold);

  // (3) optional pseudo-labels for accepted samples
  Matrix extra_X;
  LabelVector extra_y;
  if (cfg.include_pseudo_id && !split.id_indices.empty()) {
    extra_X = unlabeled.subset(split.id_indices).to_matrix();
    extra_y = head_predict(state.classifier(), extra_X).labels;
  }

  // (4) cluster the rejected samples
  LabelVector clusters;
  std::size_t k = 0;
  const auto flagged = unlabeled.subset(split.ood_indices);
  const Matrix flagged_X = flagged.to_matrix();
  if (flagged.size() > 0) {
    std::optional<std::size_t> requested;
    if (cfg.ncd_k) requested = std::min(*cfg.ncd_k, flagged.size());
    auto found = discover(flagged, requested, session_key(state.rng_seed, session, kClusterTag));
    clusters = std::move(found.labels);
    k = merge_small_clusters(flagged_X, clusters, found.k, 2);
  }

  if (k > 0 && cfg.drop_accepted_clusters) {
    const Matrix centroids = class_means(flagged_X, clusters, k);
    LabelVector remap(k, kUnlabeled);
    std::size_t kept = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const Vector centroid = centroids.row(static_cast<Eigen::Index>(c)).transpose();
      const double s = score(state.scorer, centroid, state.classifier().logits(centroid));
      if (s < state.scorer.threshold) remap[c] = static_cast<Label>(kept++);
    }
    for (auto& c : clusters) c = remap[static_cast<std::size_t>(c)];
    k = kept;
  }

  PipelineState next = state;
  SessionOutcome outcome;
  outcome.session_index = session;
  outcome.n_input = unlabeled.size();
  outcome.n_flagged_ood = split.ood_indices.size();
  outcome.discovered_k = k;

  if (k > 0) {
    IndexVector rows;
    for (std::size_t r = 0; r < clusters.size(); ++r) {
      if (clusters[r] >= 0) rows.push_back(r);
    }
    const auto novel = flagged.subset(rows);
    const Matrix novel_X = novel.to_matrix();
    const auto first = static_cast<Label>(state.registry.size());
    LabelVector local(rows.size()), novel_y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      local[i] = clusters[rows[i]];
      novel_y[i] = first + local[i];
    }

    // (5) register clusters; ground truth, when present, only names them for evaluation
    std::map<Label, Label> names;
    if (novel.labeled()) names = metrics::cluster_to_truth_mapping(local, *novel.labels);
    const Matrix centroids = class_means(novel_X, local, k);
    std::vector<std::int64_t> sizes(k, 0);
    for (const auto c : local) ++sizes[static_cast<std::size_t>(c)];
    for (std::size_t c = 0; c < k; ++c) {
      const auto it = names.find(static_cast<Label>(c));
      const auto id = next.registry.add(session, true, centroids.row(static_cast<Eigen::Index>(c)).transpose(),
                                        sizes[c], it != names.end() ? it->second : kUnlabeled);
      outcome.new_class_ids.push_back(id);
    }

    // (6) extend and train on the pseudo-labeled novel data
    TrainConfig cil = cfg.cil;
    cil.seed = session_key(state.rng_seed, session, kTrainTag);
    next.learner = learn_session(state.learner, novel_X, novel_y, cil,
                                 extra_y.empty() ? nullptr : &extra_X, extra_y);

    // (7) refit scorer statistics with the new classes
    next.scorer = refit_with_new_classes(state.scorer, next.classifier(), novel_X, novel_y, novel.ids,
                                         cfg.full_refit);
  }

  // (8) evaluate
  const auto after = evaluate_split(next, eval_test, cfg.cil.strategy);
  SessionLog& log = outcome.log;
  log.session_index = session;
  log.n_input = outcome.n_input;
  log.n_flagged_ood = outcome.n_flagged_ood;
  log.discovered_k = k;
  log.new_class_ids = outcome.new_class_ids;
  log.class_count = next.registry.size();
  log.threshold = next.scorer.threshold;
  log.id_acc = before.id_acc;
  log.ood_acc = before.ood_acc;
  log.session_acc = after.seen_acc;
  log.avg = mean_session_acc(state.session_logs, log.session_acc);

  if (unlabeled.labeled()) {
    const auto& truth = *unlabeled.labels;
    std::vector<bool> is_flagged(unlabeled.size(), false);
    for (const auto i : split.ood_indices) is_flagged[i] = true;
    std::size_t unknown = 0, caught = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] < 0 || known_before.contains(truth[i])) continue;
      ++unknown;
      caught += is_flagged[i] ? 1 : 0;
    }
    if (unknown > 0) log.unknown_recall = static_cast<double>(caught) / static_cast<double>(unknown);

    LabelVector novel_clusters, novel_truth;
    for (std::size_t r = 0; r < clusters.size(); ++r) {
      const auto t = truth[split.ood_indices[r]];
      if (clusters[r] < 0 || t < 0 || known_before.contains(t)) continue;
      novel_clusters.push_back(clusters[r]);
      novel_truth.push_back(t);
    }
    if (!novel_clusters.empty()) {
      log.cluster_acc = metrics::cluster_accuracy(novel_clusters, novel_truth);
      log.nmi = metrics::nmi(novel_clusters, novel_truth);
    }
  }

  next.session_logs.push_back(log);
  return {std::move(next), std::move(outcome)};
}

} // namespace owlkit
