#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "owlkit/classifier.hpp"
#include "owlkit/embedding.hpp"
#include "owlkit/training.hpp"

namespace owlkit {

/// Feature exemplars per class, kept in ascending class-id order.
struct ReplayBuffer {
  struct ClassExemplars {
    Label class_id = 0;
    Matrix features;  // rows are exemplars, in herding order

    bool operator==(const ClassExemplars& other) const;
  };
  std::vector<ClassExemplars> classes;

  std::size_t total() const;
  const ClassExemplars* find(Label class_id) const;
  /// Stacked exemplars and their class ids.
  std::pair<Matrix, LabelVector> training_data() const;
  /// Adds or replaces exemplars for one class.
  void set(Label class_id, Matrix features);

  bool operator==(const ReplayBuffer&) const = default;
};

/// Classifier plus the strategy-specific memory carried between sessions.
struct Learner {
  IncrementalClassifier classifier;
  std::optional<EwcState> ewc;
  ReplayBuffer replay;

  bool operator==(const Learner&) const = default;
};

/// Per-class means of X grouped by labels 0..classes-1 (rows in class order).
/// A class without samples is a data error.
Matrix class_means(const Matrix& X, std::span<const Label> y, std::size_t classes,
                   Label first_class = 0);

/// Prototypes are per-class means; the head starts from them and is trained
/// with train_linear. Labels must be dense in [0, C0).
IncrementalClassifier init_base(const EmbeddingSet& train, const TrainConfig& cfg);

/// init_base plus what the strategy carries forward: a Fisher anchor for ewc,
/// herded exemplars (and exemplar-mean prototypes) for icarl.
Learner learn_base(const EmbeddingSet& train, const TrainConfig& cfg);

/// Prototype-only extension with K shots per novel class; no gradient steps.
/// Shot labels must be dense right after the existing classes.
IncrementalClassifier fscil_update(const IncrementalClassifier& clf, const EmbeddingSet& shots,
                                   std::size_t shots_per_class);

/// One incremental session. y holds labels of new classes only, dense in
/// [C, C + n_new). `extra_X`/`extra_y` (e.g. pseudo-labeled known samples) join
/// the gradient steps but do not create classes or exemplars.
Learner learn_session(const Learner& previous, const Matrix& X, std::span<const Label> y,
                      const TrainConfig& cfg, const Matrix* extra_X = nullptr,
                      std::span<const Label> extra_y = {});

/// Strategy-appropriate prediction (NCM for ncm/icarl/fscil-proto, head otherwise).
LabelVector predict(const Learner& learner, const Matrix& X, Strategy strategy);

} // namespace owlkit
