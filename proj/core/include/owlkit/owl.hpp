#pragma once

#include <cstdint>
#include <optional>

#include "owlkit/embedding.hpp"
#include "owlkit/scorer.hpp"
#include "owlkit/state.hpp"
#include "owlkit/training.hpp"

namespace owlkit {

struct OwlConfig {
  ScorerConfig scorer = [] {
    ScorerConfig c;
    c.method = ScoreMethod::Mds;
    return c;
  }();
  double target_tpr = 0.95;
  std::optional<std::size_t> ncd_k;  // estimated per session when absent
  TrainConfig cil = [] {
    TrainConfig c;
    c.strategy = Strategy::Icarl;
    return c;
  }();
  bool include_pseudo_id = false;
  /// Re-estimate the shared covariance / principal subspace after each session
  /// instead of only appending class statistics.
  bool full_refit = false;
  /// Drop discovered clusters whose centroid the current scorer accepts as
  /// in-distribution; such clusters collect tail samples of known classes.
  bool drop_accepted_clusters = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SessionOutcome {
  int session_index = 0;
  std::size_t n_input = 0;
  std::size_t n_flagged_ood = 0;
  std::size_t discovered_k = 0;
  LabelVector new_class_ids;
  SessionLog log;
};

/// Base phase: learner from labeled base data, scorer fitted on it, one
/// registry entry per base class. The scorer is calibrated at target_tpr on
/// `val`, which also provides the session-0 log.
PipelineState run_base(const EmbeddingSet& train, const EmbeddingSet& val, const OwlConfig& cfg);

/// One open session over unlabeled inputs: score, split at tau, cluster the
/// rejected samples, register and learn the clusters as new classes, refit the
/// scorer, evaluate. Labels on `unlabeled`, when present, are ground truth and
/// only feed the evaluation. The session index is the next log index.
std::pair<PipelineState, SessionOutcome> run_open_session(const PipelineState& state,
                                                          const EmbeddingSet& unlabeled,
                                                          const EmbeddingSet& eval_test,
                                                          const OwlConfig& cfg);

struct EvalSplit {
  std::optional<double> id_acc;   // over true-known samples
  std::optional<double> ood_acc;  // over true-unknown samples
  double seen_acc = 0.0;          // classification accuracy over true-known samples
  std::size_t n_known = 0;
  std::size_t n_unknown = 0;
};

/// A sample is true-known when its label is the true label of some registry
/// class; a prediction is correct when the predicted class carries the
/// sample's true label.
EvalSplit evaluate_split(const PipelineState& state, const EmbeddingSet& eval_test, Strategy strategy);

/// Evaluates the state as it stands and appends the resulting log.
SessionLog evaluate(PipelineState& state, const EmbeddingSet& eval_test, Strategy strategy);

/// Reassigns members of clusters smaller than min_size to the nearest
/// centroid of a cluster that is large enough, then renumbers the remaining
/// clusters densely in ascending order. Returns the new cluster count
/// (0 when no cluster is large enough, in which case every label becomes -1).
std::size_t merge_small_clusters(const Matrix& X, LabelVector& labels, std::size_t k, std::size_t min_size);

} // namespace owlkit
