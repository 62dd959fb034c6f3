#include "owlkit/classifier.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "owlkit/error.hpp"

namespace owlkit {

std::string_view to_string(HeadKind kind) {
  return kind == HeadKind::Linear ? "linear" : "cosine";
}

HeadKind parse_head_kind(std::string_view text) {
  if (text == "linear") return HeadKind::Linear;
  if (text == "cosine") return HeadKind::Cosine;
  fail(ErrorKind::Config, "unknown head kind '" + std::string(text) + "'");
}

namespace {

double cosine_logit(const Eigen::Ref<const Eigen::RowVectorXd>& w, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                    double scale) {
  const double wn = w.norm();
  const double xn = x.norm();
  if (wn == 0.0 || xn == 0.0) return 0.0;
  return scale * w.dot(x) / (wn * xn);
}

void require_width(const IncrementalClassifier& clf, Eigen::Index cols) {
  require(cols == static_cast<Eigen::Index>(clf.dim()), ErrorKind::Shape,
          "feature width " + std::to_string(cols) + " != classifier width " + std::to_string(clf.dim()));
}

} // namespace

Vector IncrementalClassifier::logits(const Vector& x) const {
  require_width(*this, x.size());
  Vector z(weights.rows());
  for (Eigen::Index c = 0; c < weights.rows(); ++c) {
    z[c] = head_kind == HeadKind::Linear ? weights.row(c).dot(x.transpose()) + bias[c]
                                         : cosine_logit(weights.row(c), x.transpose(), cosine_scale);
  }
  return z;
}

Matrix IncrementalClassifier::logits(const Matrix& X) const {
  require_width(*this, X.cols());
  Matrix z(X.rows(), weights.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    // Same arithmetic as the single-sample path, so batch and per-sample
    // logits agree bitwise.
    const Vector x = X.row(i).transpose();
    z.row(i) = logits(x).transpose();
  }
  return z;
}

void IncrementalClassifier::validate() const {
  require(bias.size() == weights.rows() && prototypes.rows() == weights.rows(), ErrorKind::Shape,
          "weights, bias and prototypes must agree on the class count");
  require(prototypes.cols() == weights.cols(), ErrorKind::Shape, "prototype width differs from weights");
  require(cosine_scale > 0.0, ErrorKind::Argument, "cosine scale must be positive");
  require(weights.allFinite() && bias.allFinite() && prototypes.allFinite(), ErrorKind::Numeric,
          "classifier parameters are not finite");
}

IncrementalClassifier IncrementalClassifier::empty(std::size_t dim, HeadKind kind, double cosine_scale) {
  require(dim >= 1, ErrorKind::Argument, "classifier width must be >= 1");
  IncrementalClassifier clf;
  const auto d = static_cast<Eigen::Index>(dim);
  clf.weights = Matrix::Zero(0, d);
  clf.bias = Vector::Zero(0);
  clf.prototypes = Matrix::Zero(0, d);
  clf.head_kind = kind;
  clf.cosine_scale = cosine_scale;
  return clf;
}

bool IncrementalClassifier::operator==(const IncrementalClassifier& other) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return head_kind == other.head_kind && cosine_scale == other.cosine_scale &&
         same(weights, other.weights) && same(bias, other.bias) && same(prototypes, other.prototypes);
}

IncrementalClassifier extend_head(const IncrementalClassifier& clf, std::size_t new_class_count,
                                  const Matrix& init_prototypes) {
  const auto added = static_cast<Eigen::Index>(new_class_count);
  require(init_prototypes.rows() == added, ErrorKind::Shape,
          "expected " + std::to_string(new_class_count) + " prototypes, got " +
              std::to_string(init_prototypes.rows()));
  if (added == 0) return clf;
  require(init_prototypes.cols() == static_cast<Eigen::Index>(clf.dim()), ErrorKind::Shape,
          "prototype width " + std::to_string(init_prototypes.cols()) + " != classifier width " +
              std::to_string(clf.dim()));
  require(init_prototypes.allFinite(), ErrorKind::Data, "prototypes must be finite");

  IncrementalClassifier out = clf;
  const auto old = clf.weights.rows();
  const auto d = clf.weights.cols();
  out.weights.conservativeResize(old + added, d);
  out.bias.conservativeResize(old + added);
  out.prototypes.conservativeResize(old + added, d);
  const Matrix rows = clf.head_kind == HeadKind::Cosine ? normalize_rows(init_prototypes) : init_prototypes;
  out.weights.bottomRows(added) = rows;
  out.bias.tail(added).setZero();
  out.prototypes.bottomRows(added) = init_prototypes;
  return out;
}

Eigen::Index argmax_first(const Vector& values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Matrix normalize_rows(const Matrix& X) {
  Matrix out = X;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

LabelVector ncm_predict(const IncrementalClassifier& clf, const Matrix& X) {
  require_width(clf, X.cols());
  require(clf.class_count() > 0, ErrorKind::State, "classifier has no classes");
  const Matrix protos = normalize_rows(clf.prototypes);
  const Matrix feats = normalize_rows(X);
  LabelVector out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < feats.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    Label best_c = 0;
    for (Eigen::Index c = 0; c < protos.rows(); ++c) {
      const double d2 = (feats.row(i) - protos.row(c)).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_c = static_cast<Label>(c);
      }
    }
    out[static_cast<std::size_t>(i)] = best_c;
  }
  return out;
}

HeadPrediction head_predict(const IncrementalClassifier& clf, const Matrix& X) {
  require(clf.class_count() > 0, ErrorKind::State, "classifier has no classes");
  HeadPrediction out;
  out.logits = clf.logits(X);
  out.labels.resize(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.labels[static_cast<std::size_t>(i)] = static_cast<Label>(argmax_first(out.logits.row(i).transpose()));
  }
  return out;
}

IndexVector herding_select(const Matrix& X_class, std::size_t m) {
  const auto n = static_cast<std::size_t>(X_class.rows());
  require(m >= 1, ErrorKind::Argument, "herding needs m >= 1");
  require(m <= n, ErrorKind::Argument,
          "cannot select " + std::to_string(m) + " exemplars from " + std::to_string(n) + " samples");
  const Matrix feats = normalize_rows(X_class);
  const Eigen::RowVectorXd mu = feats.colwise().mean();
  Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(feats.cols());
  std::vector<bool> taken(n, false);
  IndexVector picked;
  picked.reserve(m);
  for (std::size_t step = 1; step <= m; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double cost =
          (mu - (running + feats.row(static_cast<Eigen::Index>(i))) / static_cast<double>(step)).norm();
      if (cost < best) {
        best = cost;
        best_i = i;
      }
    }
    taken[best_i] = true;
    running += feats.row(static_cast<Eigen::Index>(best_i));
    picked.push_back(best_i);
  }
  return picked;
}

} // namespace owlkit
