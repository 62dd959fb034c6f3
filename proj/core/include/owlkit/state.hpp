#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "owlkit/registry.hpp"
#include "owlkit/scorer.hpp"
#include "owlkit/strategies.hpp"

namespace owlkit {

inline constexpr const char* kStateVersion = "owl-state-v1";

/// Evaluation record of one session. Rates are fractions in [0, 1]; reports
/// convert them to percentages. Metrics that do not apply are absent.
struct SessionLog {
  int session_index = 0;
  std::size_t n_input = 0;
  std::size_t n_flagged_ood = 0;
  std::size_t discovered_k = 0;
  LabelVector new_class_ids;
  std::size_t class_count = 0;
  double threshold = 0.0;

  std::optional<double> id_acc;          // true-known: accepted and correctly classified
  std::optional<double> ood_acc;         // true-unknown: rejected
  std::optional<double> unknown_recall;  // session input: unknowns flagged
  double session_acc = 0.0;              // all seen classes, after the update
  double avg = 0.0;                      // mean session_acc so far
  std::optional<double> cluster_acc;
  std::optional<double> nmi;

  bool operator==(const SessionLog&) const = default;
};

struct PipelineState {
  ClassRegistry registry;
  Learner learner;
  FittedScorer scorer;
  std::vector<SessionLog> session_logs;
  std::uint64_t rng_seed = 0;

  const IncrementalClassifier& classifier() const { return learner.classifier; }
  /// Throws a Consistency error when the pieces disagree.
  void validate() const;

  bool operator==(const PipelineState&) const = default;
};

/// Writes state.json, registry.json, logs.json, classifier.npy, scorer.npy and,
/// when the learner carries them, replay.npy and ewc.npy.
void save_state(const PipelineState& state, const std::filesystem::path& dir);
PipelineState load_state(const std::filesystem::path& dir);

/// logs.json text for a list of logs (stable key order, shortest round-trip numbers).
std::string logs_to_json(const std::vector<SessionLog>& logs);
std::vector<SessionLog> logs_from_json(const std::string& text);

} // namespace owlkit
