#include "owlkit/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "owlkit/error.hpp"
#include "owlkit/metrics.hpp"

namespace owlkit {

std::string_view to_string(ScoreMethod method) {
  switch (method) {
    case ScoreMethod::Msp: return "msp";
    case ScoreMethod::Mls: return "mls";
    case ScoreMethod::Energy: return "energy";
    case ScoreMethod::TSoftmax: return "tsoftmax";
    case ScoreMethod::Mds: return "mds";
    case ScoreMethod::Vim: return "vim";
    case ScoreMethod::Knn: return "knn";
  }
  return "?";
}

ScoreMethod parse_score_method(std::string_view text) {
  for (auto m : {ScoreMethod::Msp, ScoreMethod::Mls, ScoreMethod::Energy, ScoreMethod::TSoftmax,
                 ScoreMethod::Mds, ScoreMethod::Vim, ScoreMethod::Knn}) {
    if (to_string(m) == text) return m;
  }
  fail(ErrorKind::Config, "unknown scoring method '" + std::string(text) + "'");
}

double ScorerConfig::effective_temperature() const {
  if (temperature) return *temperature;
  return method == ScoreMethod::TSoftmax ? 1000.0 : 1.0;
}

void ScorerConfig::validate() const {
  require(effective_temperature() > 0.0 && std::isfinite(effective_temperature()), ErrorKind::Config,
          "temperature must be positive");
  require(vim_variance_target > 0.0 && vim_variance_target <= 1.0, ErrorKind::Config,
          "vim_variance_target must lie in (0, 1]");
  require(!vim_dim_override || *vim_dim_override >= 1, ErrorKind::Config,
          "vim_dim_override must be positive");
  require(knn_k >= 1, ErrorKind::Config, "knn_k must be at least 1");
  require(shrinkage_scale > 0.0, ErrorKind::Config, "shrinkage_scale must be positive");
}

namespace {

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool uses_features(ScoreMethod m) {
  return m == ScoreMethod::Mds || m == ScoreMethod::Vim || m == ScoreMethod::Knn;
}

double logsumexp(const Vector& z) {
  const double top = z.maxCoeff();
  return top + std::log((z.array() - top).exp().sum());
}

double max_softmax(const Vector& z) {
  const double top = z.maxCoeff();
  return 1.0 / (z.array() - top).exp().sum();
}

// Pooled within-class covariance (1/N) around the given class means.
Matrix within_class_scatter(const Matrix& X, std::span<const Label> y, const Matrix& means) {
  Matrix centered = X;
  for (Eigen::Index i = 0; i < X.rows(); ++i) centered.row(i) -= means.row(y[static_cast<std::size_t>(i)]);
  return centered.transpose() * centered;
}

Matrix precision_factor(const Matrix& covariance, double shrinkage_scale) {
  const auto d = covariance.rows();
  const double eps = shrinkage_scale * covariance.trace() / static_cast<double>(d);
  Matrix shrunk = covariance;
  shrunk.diagonal().array() += eps;
  Eigen::LLT<Matrix> llt(shrunk);
  require(llt.info() == Eigen::Success, ErrorKind::Numeric, "shared covariance is singular despite shrinkage");
  const Matrix precision = llt.solve(Matrix::Identity(d, d));
  Eigen::LLT<Matrix> factor(0.5 * (precision + precision.transpose()));
  require(factor.info() == Eigen::Success, ErrorKind::Numeric, "shrunk precision is not positive definite");
  Matrix L = factor.matrixL();
  require(L.allFinite() && (L.diagonal().array() > 0.0).all(), ErrorKind::Numeric,
          "precision factor is not finite");
  return L;
}

Matrix principal_subspace(const Matrix& covariance, const ScorerConfig& cfg) {
  const auto d = covariance.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
  require(eig.info() == Eigen::Success, ErrorKind::Numeric, "eigendecomposition failed");
  // Eigen sorts ascending; walk from the top.
  const Vector values = eig.eigenvalues().cwiseMax(0.0);
  Eigen::Index p = 0;
  if (cfg.vim_dim_override) {
    p = std::min<Eigen::Index>(*cfg.vim_dim_override, d);
  } else {
    const double total = values.sum();
    double captured = 0.0;
    p = d;
    for (Eigen::Index j = 0; j < d; ++j) {
      captured += values(d - 1 - j);
      if (captured >= cfg.vim_variance_target * total) {
        p = j + 1;
        break;
      }
    }
  }
  return eig.eigenvectors().rightCols(p).rowwise().reverse();
}

double vim_alpha(const FittedScorer& s, const IncrementalClassifier& clf, const Matrix& X) {
  double logit_sum = 0.0;
  double residual_sum = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Vector x = X.row(i).transpose();
    logit_sum += clf.logits(x).maxCoeff();
    residual_sum += vim_residual(s, x);
  }
  const double n = static_cast<double>(X.rows());
  const double mean_logit = std::abs(logit_sum / n);
  const double mean_residual = residual_sum / n;
  // Residuals at roundoff level relative to the data spread carry no signal.
  const double floor = 1e-9 * std::sqrt(std::max(s.feature_covariance.trace(), 0.0));
  if (!(mean_residual > floor) || !(mean_logit > 0.0) || !std::isfinite(mean_logit / mean_residual)) return 1.0;
  return mean_logit / mean_residual;
}

Matrix rows_where(const Matrix& X, std::span<const std::int64_t> ids, bool calibration) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (is_calibration_id(ids[i]) == calibration) rows.push_back(static_cast<Eigen::Index>(i));
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
  return out;
}

Matrix append_rows(const Matrix& top, const Matrix& bottom) {
  if (bottom.rows() == 0) return top;
  if (top.rows() == 0) return bottom;
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

void rescore_calibration(FittedScorer& s, const IncrementalClassifier& clf) {
  s.id_val_scores = s.calibration_features.rows() > 0 ? score_batch(s, clf, s.calibration_features)
                                                      : std::vector<double>{};
}

} // namespace

bool FittedScorer::operator==(const FittedScorer& o) const {
  return config == o.config && class_count == o.class_count && dim == o.dim &&
         same(class_means, o.class_means) && same(shared_covariance, o.shared_covariance) &&
         same(shared_precision_factor, o.shared_precision_factor) &&
         same(feature_mean, o.feature_mean) && same(feature_covariance, o.feature_covariance) &&
         same(principal_basis, o.principal_basis) && alpha == o.alpha &&
         same(train_features, o.train_features) && fit_count == o.fit_count &&
         same(calibration_features, o.calibration_features) && id_val_scores == o.id_val_scores &&
         target_tpr == o.target_tpr && threshold == o.threshold && calibrated == o.calibrated;
}

FittedScorer logit_scorer(const ScorerConfig& config, std::size_t class_count, std::size_t dim) {
  config.validate();
  require(!uses_features(config.method), ErrorKind::Argument,
          std::string(to_string(config.method)) + " needs training features");
  FittedScorer s;
  s.config = config;
  s.class_count = class_count;
  s.dim = dim;
  return s;
}

FittedScorer fit_scorer(const ScorerConfig& config, const EmbeddingSet& train,
                        const IncrementalClassifier& classifier) {
  config.validate();
  require(train.labeled(), ErrorKind::Data, "scorer training data must be labeled");
  require(train.dim() == classifier.dim(), ErrorKind::Shape, "training features and classifier differ in width");
  const auto& labels = *train.labels;
  for (const auto label : labels) {
    require(label >= 0 && static_cast<std::size_t>(label) < classifier.class_count(), ErrorKind::Data,
            "label " + std::to_string(label) + " is not covered by the classifier");
  }

  FittedScorer s;
  s.config = config;
  s.class_count = classifier.class_count();
  s.dim = train.dim();

  const Matrix all = train.to_matrix();
  const Matrix fit = rows_where(all, train.ids, false);
  s.calibration_features = rows_where(all, train.ids, true);
  LabelVector fit_labels;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!is_calibration_id(train.ids[i])) fit_labels.push_back(labels[i]);
  }
  require(fit.rows() > 0, ErrorKind::Data, "no training rows outside the calibration split");
  s.fit_count = static_cast<std::size_t>(fit.rows());

  switch (config.method) {
    case ScoreMethod::Mds: {
      const auto C = static_cast<Eigen::Index>(s.class_count);
      Matrix sums = Matrix::Zero(C, fit.cols());
      std::vector<std::size_t> counts(s.class_count, 0);
      for (Eigen::Index i = 0; i < fit.rows(); ++i) {
        sums.row(fit_labels[static_cast<std::size_t>(i)]) += fit.row(i);
        ++counts[static_cast<std::size_t>(fit_labels[static_cast<std::size_t>(i)])];
      }
      for (Eigen::Index c = 0; c < C; ++c) {
        require(counts[static_cast<std::size_t>(c)] >= 2, ErrorKind::Data,
                "class " + std::to_string(c) + " has fewer than 2 fitting samples");
        sums.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
      s.class_means = sums;
      s.shared_covariance = within_class_scatter(fit, fit_labels, s.class_means) / static_cast<double>(fit.rows());
      s.shared_precision_factor = precision_factor(s.shared_covariance, config.shrinkage_scale);
      break;
    }
    case ScoreMethod::Vim: {
      s.feature_mean = fit.colwise().mean().transpose();
      const Matrix centered = fit.rowwise() - s.feature_mean.transpose();
      s.feature_covariance = centered.transpose() * centered / static_cast<double>(fit.rows());
      s.principal_basis = principal_subspace(s.feature_covariance, config);
      s.alpha = vim_alpha(s, classifier, fit);
      break;
    }
    case ScoreMethod::Knn: s.train_features = normalize_rows(fit); break;
    default: break;
  }

  rescore_calibration(s, classifier);
  return s;
}

double vim_residual(const FittedScorer& s, const Vector& feature) {
  const Vector centered = feature - s.feature_mean;
  return (centered - s.principal_basis * (s.principal_basis.transpose() * centered)).norm();
}

double score(const FittedScorer& s, const Vector& feature, const Vector& logits) {
  require(static_cast<std::size_t>(feature.size()) == s.dim, ErrorKind::Shape,
          "feature has width " + std::to_string(feature.size()) + ", scorer expects " + std::to_string(s.dim));
  require(static_cast<std::size_t>(logits.size()) == s.class_count, ErrorKind::Shape,
          "logits have length " + std::to_string(logits.size()) + ", scorer expects " +
              std::to_string(s.class_count));
  const double T = s.config.effective_temperature();
  switch (s.config.method) {
    case ScoreMethod::Msp: return max_softmax(logits);
    case ScoreMethod::Mls: return logits.maxCoeff();
    case ScoreMethod::Energy: return T * logsumexp(logits / T);
    case ScoreMethod::TSoftmax: return max_softmax(logits / T);
    case ScoreMethod::Mds: {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < s.class_means.rows(); ++c) {
        const Vector diff = feature - s.class_means.row(c).transpose();
        best = std::min(best, (s.shared_precision_factor.transpose() * diff).norm());
      }
      return -best;
    }
    case ScoreMethod::Vim: return logits.maxCoeff() - s.alpha * vim_residual(s, feature);
    case ScoreMethod::Knn: {
      const auto n = s.train_features.rows();
      require(n > 0, ErrorKind::State, "knn scorer has no training features");
      const double norm = feature.norm();
      const Vector x = norm > 0.0 ? Vector(feature / norm) : feature;
      std::vector<double> dist(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) {
        dist[static_cast<std::size_t>(i)] = (s.train_features.row(i).transpose() - x).norm();
      }
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(s.config.knn_k), dist.size());
      std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
      return -dist[k - 1];
    }
  }
  return 0.0;
}

std::vector<double> score_batch(const FittedScorer& s, const IncrementalClassifier& clf, const Matrix& X) {
  std::vector<double> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Vector x = X.row(i).transpose();
    out[static_cast<std::size_t>(i)] = score(s, x, clf.logits(x));
  }
  return out;
}

FittedScorer with_calibration_set(const FittedScorer& scorer, const IncrementalClassifier& classifier,
                                  const Matrix& X) {
  require(static_cast<std::size_t>(X.cols()) == scorer.dim, ErrorKind::Shape,
          "calibration rows have the wrong width");
  FittedScorer s = scorer;
  s.calibration_features = X;
  rescore_calibration(s, classifier);
  return s;
}

double calibrate_threshold(FittedScorer& s, double target_tpr) {
  require(!s.id_val_scores.empty(), ErrorKind::State, "no validation scores to calibrate on");
  require(target_tpr > 0.0 && target_tpr <= 1.0, ErrorKind::Argument, "target TPR must lie in (0, 1]");
  s.threshold = metrics::threshold_for_tpr(s.id_val_scores, target_tpr);
  s.target_tpr = target_tpr;
  s.calibrated = true;
  return s.threshold;
}

ThresholdSplit split_by_threshold(std::span<const double> scores, double tau) {
  ThresholdSplit split;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (scores[i] >= tau ? split.id_indices : split.ood_indices).push_back(i);
  }
  return split;
}

FittedScorer refit_with_new_classes(const FittedScorer& scorer, const IncrementalClassifier& updated,
                                    const Matrix& X, std::span<const Label> labels,
                                    std::span<const std::int64_t> ids, bool full_refit) {
  require(X.rows() == static_cast<Eigen::Index>(labels.size()) && labels.size() == ids.size(),
          ErrorKind::Shape, "refit rows, labels and ids differ in length");
  require(updated.class_count() >= scorer.class_count, ErrorKind::Argument,
          "updated classifier lost classes");
  FittedScorer s = scorer;
  const auto first = static_cast<Label>(scorer.class_count);
  const auto added = updated.class_count() - scorer.class_count;
  s.class_count = updated.class_count();

  const Matrix fit = rows_where(X, ids, false);
  LabelVector fit_labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= first && labels[i] < static_cast<Label>(s.class_count), ErrorKind::Data,
            "refit label " + std::to_string(labels[i]) + " is not a new class");
    if (!is_calibration_id(ids[i])) fit_labels.push_back(labels[i]);
  }

  switch (s.config.method) {
    case ScoreMethod::Mds: {
      // Means come from every row of the new classes so no class is left without one.
      Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(added), X.cols());
      std::vector<std::size_t> counts(added, 0);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        sums.row(labels[i] - first) += X.row(static_cast<Eigen::Index>(i));
        ++counts[static_cast<std::size_t>(labels[i] - first)];
      }
      for (std::size_t c = 0; c < added; ++c) {
        require(counts[c] > 0, ErrorKind::Data, "new class " + std::to_string(first + static_cast<Label>(c)) +
                                                    " has no samples");
        sums.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
      }
      s.class_means = append_rows(s.class_means, sums);
      if (full_refit && fit.rows() > 0) {
        LabelVector local(fit_labels.size());
        for (std::size_t i = 0; i < local.size(); ++i) local[i] = fit_labels[i] - first;
        const Matrix scatter = within_class_scatter(fit, local, sums);
        const auto n_old = static_cast<double>(s.fit_count);
        const auto n_new = static_cast<double>(fit.rows());
        s.shared_covariance = (s.shared_covariance * n_old + scatter) / (n_old + n_new);
        s.fit_count += static_cast<std::size_t>(fit.rows());
        s.shared_precision_factor = precision_factor(s.shared_covariance, s.config.shrinkage_scale);
      }
      break;
    }
    case ScoreMethod::Vim:
      if (full_refit && fit.rows() > 0) {
        const auto n_old = static_cast<double>(s.fit_count);
        const auto n_new = static_cast<double>(fit.rows());
        const Vector new_mean = fit.colwise().mean().transpose();
        const Vector mean = (s.feature_mean * n_old + new_mean * n_new) / (n_old + n_new);
        const Matrix centered = fit.rowwise() - new_mean.transpose();
        const Vector d_old = s.feature_mean - mean;
        const Vector d_new = new_mean - mean;
        const Matrix scatter = s.feature_covariance * n_old + d_old * d_old.transpose() * n_old +
                               centered.transpose() * centered + d_new * d_new.transpose() * n_new;
        s.feature_mean = mean;
        s.feature_covariance = scatter / (n_old + n_new);
        s.fit_count += static_cast<std::size_t>(fit.rows());
        s.principal_basis = principal_subspace(s.feature_covariance, s.config);
        s.alpha = vim_alpha(s, updated, append_rows(s.calibration_features, fit));
      }
      break;
    case ScoreMethod::Knn: s.train_features = append_rows(s.train_features, normalize_rows(fit)); break;
    default: break;
  }

  s.calibration_features = append_rows(s.calibration_features, rows_where(X, ids, true));
  rescore_calibration(s, updated);
  if (s.calibrated && !s.id_val_scores.empty()) calibrate_threshold(s, s.target_tpr);
  return s;
}

} // namespace owlkit
