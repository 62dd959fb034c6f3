#include "owlkit/strategies.hpp"

#include <algorithm>
#include <string>

#include "owlkit/error.hpp"

namespace owlkit {

bool ReplayBuffer::ClassExemplars::operator==(const ClassExemplars& other) const {
  return class_id == other.class_id && features.rows() == other.features.rows() &&
         features.cols() == other.features.cols() && features == other.features;
}

std::size_t ReplayBuffer::total() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += static_cast<std::size_t>(c.features.rows());
  return n;
}

const ReplayBuffer::ClassExemplars* ReplayBuffer::find(Label class_id) const {
  for (const auto& c : classes) {
    if (c.class_id == class_id) return &c;
  }
  return nullptr;
}

std::pair<Matrix, LabelVector> ReplayBuffer::training_data() const {
  Eigen::Index cols = classes.empty() ? 0 : classes.front().features.cols();
  Matrix X(static_cast<Eigen::Index>(total()), cols);
  LabelVector y;
  y.reserve(total());
  Eigen::Index row = 0;
  for (const auto& c : classes) {
    X.middleRows(row, c.features.rows()) = c.features;
    row += c.features.rows();
    y.insert(y.end(), static_cast<std::size_t>(c.features.rows()), c.class_id);
  }
  return {X, y};
}

void ReplayBuffer::set(Label class_id, Matrix features) {
  auto it = std::lower_bound(classes.begin(), classes.end(), class_id,
                             [](const ClassExemplars& c, Label id) { return c.class_id < id; });
  if (it != classes.end() && it->class_id == class_id) {
    it->features = std::move(features);
  } else {
    classes.insert(it, ClassExemplars{class_id, std::move(features)});
  }
}

Matrix class_means(const Matrix& X, std::span<const Label> y, std::size_t classes, Label first_class) {
  require(X.rows() == static_cast<Eigen::Index>(y.size()), ErrorKind::Shape,
          "feature rows and labels differ in length");
  Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(classes), X.cols());
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const Label local = y[i] - first_class;
    require(local >= 0 && static_cast<std::size_t>(local) < classes, ErrorKind::Data,
            "label " + std::to_string(y[i]) + " outside the expected class range");
    sums.row(local) += X.row(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(local)];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    require(counts[c] > 0, ErrorKind::Data,
            "class " + std::to_string(static_cast<Label>(c) + first_class) + " has no samples");
    sums.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
  }
  return sums;
}

namespace {

std::size_t dense_class_count(std::span<const Label> y, Label first_class) {
  Label top = first_class - 1;
  for (const auto label : y) {
    require(label >= first_class, ErrorKind::Data,
            "label " + std::to_string(label) + " is not a new class (expected >= " +
                std::to_string(first_class) + ")");
    top = std::max(top, label);
  }
  return static_cast<std::size_t>(top - first_class + 1);
}

Matrix rows_with_label(const Matrix& X, std::span<const Label> y, Label label) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == label) rows.push_back(static_cast<Eigen::Index>(i));
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
  return out;
}

// Herds exemplars for the given classes and sets their prototypes to the
// exemplar means.
void herd_classes(Learner& learner, const Matrix& X, std::span<const Label> y, Label first,
                  std::size_t count, std::size_t budget) {
  for (std::size_t c = 0; c < count; ++c) {
    const Label label = first + static_cast<Label>(c);
    const Matrix members = rows_with_label(X, y, label);
    const auto m = std::min(budget, static_cast<std::size_t>(members.rows()));
    const auto picked = herding_select(members, m);
    Matrix exemplars(static_cast<Eigen::Index>(picked.size()), X.cols());
    for (std::size_t r = 0; r < picked.size(); ++r) {
      exemplars.row(static_cast<Eigen::Index>(r)) = members.row(static_cast<Eigen::Index>(picked[r]));
    }
    learner.classifier.prototypes.row(label) = exemplars.colwise().mean();
    learner.replay.set(label, std::move(exemplars));
  }
}

} // namespace

IncrementalClassifier init_base(const EmbeddingSet& train, const TrainConfig& cfg) {
  cfg.validate();
  require(train.labeled(), ErrorKind::Data, "base training data must be labeled");
  require(train.size() > 0, ErrorKind::Data, "base training set is empty");
  const auto& y = *train.labels;
  const auto classes = dense_class_count(y, 0);
  const Matrix X = train.to_matrix();
  const Matrix protos = class_means(X, y, classes);
  auto clf = extend_head(IncrementalClassifier::empty(train.dim(), cfg.head_kind, cfg.cosine_scale),
                         classes, protos);
  return train_linear(clf, X, y, cfg).classifier;
}

Learner learn_base(const EmbeddingSet& train, const TrainConfig& cfg) {
  Learner learner;
  learner.classifier = init_base(train, cfg);
  const Matrix X = train.to_matrix();
  const auto& y = *train.labels;
  if (cfg.strategy == Strategy::Ewc) learner.ewc = compute_fisher(learner.classifier, X, y);
  if (cfg.strategy == Strategy::Icarl) {
    herd_classes(learner, X, y, 0, learner.classifier.class_count(),
                 static_cast<std::size_t>(cfg.replay_budget_m));
  }
  return learner;
}

IncrementalClassifier fscil_update(const IncrementalClassifier& clf, const EmbeddingSet& shots,
                                   std::size_t shots_per_class) {
  require(shots_per_class >= 1, ErrorKind::Argument, "K must be at least 1");
  require(shots.labeled(), ErrorKind::Data, "few-shot data must be labeled");
  const auto first = static_cast<Label>(clf.class_count());
  const auto& y = *shots.labels;
  const auto novel = dense_class_count(y, first);
  std::vector<std::size_t> counts(novel, 0);
  for (const auto label : y) ++counts[static_cast<std::size_t>(label - first)];
  for (std::size_t c = 0; c < novel; ++c) {
    require(counts[c] == shots_per_class, ErrorKind::Data,
            "class " + std::to_string(first + static_cast<Label>(c)) + " has " +
                std::to_string(counts[c]) + " shots, expected " + std::to_string(shots_per_class));
  }
  return extend_head(clf, novel, class_means(shots.to_matrix(), y, novel, first));
}

Learner learn_session(const Learner& previous, const Matrix& X, std::span<const Label> y,
                      const TrainConfig& cfg, const Matrix* extra_X, std::span<const Label> extra_y) {
  cfg.validate();
  require(X.rows() == static_cast<Eigen::Index>(y.size()), ErrorKind::Shape,
          "feature rows and labels differ in length");
  if (y.empty()) return previous;

  const auto first = static_cast<Label>(previous.classifier.class_count());
  const auto novel = dense_class_count(y, first);
  Learner next = previous;
  next.classifier = extend_head(previous.classifier, novel, class_means(X, y, novel, first));

  if (cfg.strategy == Strategy::Ncm || cfg.strategy == Strategy::FscilProto) return next;

  Matrix data = X;
  LabelVector labels(y.begin(), y.end());
  if (extra_X != nullptr && extra_X->rows() > 0) {
    require(extra_X->rows() == static_cast<Eigen::Index>(extra_y.size()), ErrorKind::Shape,
            "extra rows and labels differ in length");
    data.conservativeResize(X.rows() + extra_X->rows(), X.cols());
    data.bottomRows(extra_X->rows()) = *extra_X;
    labels.insert(labels.end(), extra_y.begin(), extra_y.end());
  }

  const IncrementalClassifier* old_head = nullptr;
  const EwcState* anchor = nullptr;
  const ReplayBuffer* replay = nullptr;
  switch (cfg.strategy) {
    case Strategy::Lwf: old_head = &previous.classifier; break;
    case Strategy::Ewc: anchor = previous.ewc ? &*previous.ewc : nullptr; break;
    case Strategy::Icarl:
      old_head = &previous.classifier;
      replay = &previous.replay;
      break;
    default: break;
  }
  next.classifier = train_linear(next.classifier, data, labels, cfg, old_head, anchor, replay).classifier;

  if (cfg.strategy == Strategy::Ewc) {
    const auto fresh = compute_fisher(next.classifier, X, y);
    next.ewc = previous.ewc ? merge_fisher(*previous.ewc, fresh) : fresh;
  }
  if (cfg.strategy == Strategy::Icarl) {
    herd_classes(next, X, y, first, novel, static_cast<std::size_t>(cfg.replay_budget_m));
  }
  return next;
}

LabelVector predict(const Learner& learner, const Matrix& X, Strategy strategy) {
  return predicts_with_ncm(strategy) ? ncm_predict(learner.classifier, X)
                                     : head_predict(learner.classifier, X).labels;
}

} // namespace owlkit
