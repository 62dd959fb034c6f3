#include "owlkit/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "owlkit/error.hpp"
#include "owlkit/rng.hpp"
#include "owlkit/strategies.hpp"

namespace owlkit {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::Ncm: return "ncm";
    case Strategy::Finetune: return "finetune";
    case Strategy::Lwf: return "lwf";
    case Strategy::Ewc: return "ewc";
    case Strategy::Icarl: return "icarl";
    case Strategy::FscilProto: return "fscil-proto";
  }
  return "";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "ncm") return Strategy::Ncm;
  if (text == "finetune") return Strategy::Finetune;
  if (text == "lwf") return Strategy::Lwf;
  if (text == "ewc") return Strategy::Ewc;
  if (text == "icarl") return Strategy::Icarl;
  if (text == "fscil-proto") return Strategy::FscilProto;
  fail(ErrorKind::Config, "unknown CIL strategy '" + std::string(text) + "'");
}

bool predicts_with_ncm(Strategy strategy) {
  return strategy == Strategy::Ncm || strategy == Strategy::Icarl || strategy == Strategy::FscilProto;
}

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorKind::Config, "epochs must be positive");
  require(lr > 0.0, ErrorKind::Argument, "learning rate must be positive");
  require(weight_decay >= 0.0, ErrorKind::Config, "weight_decay must be non-negative");
  require(batch_size >= 1, ErrorKind::Config, "batch_size must be positive");
  require(lambda_lwf >= 0.0, ErrorKind::Config, "lambda_lwf must be non-negative");
  require(kd_temperature > 0.0, ErrorKind::Config, "kd_temperature must be positive");
  require(lambda_ewc >= 0.0, ErrorKind::Config, "lambda_ewc must be non-negative");
  require(replay_budget_m >= 1, ErrorKind::Config, "replay_budget_m must be positive");
  require(cosine_scale > 0.0, ErrorKind::Config, "cosine_scale must be positive");
}

bool EwcState::operator==(const EwcState& other) const {
  return class_count == other.class_count && dim == other.dim &&
         fisher_diag.size() == other.fisher_diag.size() && fisher_diag == other.fisher_diag &&
         theta_star.size() == other.theta_star.size() && theta_star == other.theta_star;
}

Vector softmax(const Vector& logits) {
  const double top = logits.maxCoeff();
  Vector e = (logits.array() - top).exp();
  return e / e.sum();
}

Vector log_softmax(const Vector& logits) {
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return logits.array() - lse;
}

Vector flatten_params(const IncrementalClassifier& clf, std::optional<std::size_t> class_limit) {
  const auto c = static_cast<Eigen::Index>(class_limit.value_or(clf.class_count()));
  require(c <= static_cast<Eigen::Index>(clf.class_count()), ErrorKind::Argument,
          "class limit exceeds classifier size");
  const auto d = clf.weights.cols();
  Vector theta(c * d + c);
  for (Eigen::Index r = 0; r < c; ++r) theta.segment(r * d, d) = clf.weights.row(r).transpose();
  theta.tail(c) = clf.bias.head(c);
  return theta;
}

void unflatten_params(IncrementalClassifier& clf, const Vector& theta) {
  const auto c = clf.weights.rows();
  const auto d = clf.weights.cols();
  require(theta.size() == c * d + c, ErrorKind::Shape, "parameter vector length mismatch");
  for (Eigen::Index r = 0; r < c; ++r) clf.weights.row(r) = theta.segment(r * d, d).transpose();
  clf.bias = theta.tail(c);
}

double ewc_penalty(const Vector& theta, const EwcState& ewc, double lambda) {
  require(theta.size() == ewc.fisher_diag.size() && theta.size() == ewc.theta_star.size(),
          ErrorKind::Shape, "EWC vectors differ in length");
  return 0.5 * lambda * (ewc.fisher_diag.array() * (theta - ewc.theta_star).array().square()).sum();
}

Vector LossGradient::flat() const {
  const auto c = grad_weights.rows();
  const auto d = grad_weights.cols();
  Vector g(c * d + c);
  for (Eigen::Index r = 0; r < c; ++r) g.segment(r * d, d) = grad_weights.row(r).transpose();
  g.tail(c) = grad_bias;
  return g;
}

double distillation_kl(const Vector& old_logits, const Vector& new_logits, double temperature) {
  const Vector log_q = log_softmax(old_logits / temperature);
  const Vector log_p = log_softmax(new_logits / temperature);
  return (log_q.array().exp() * (log_q - log_p).array()).sum();
}

namespace {

// Adds dL/dz (one sample) into the parameter gradients.
void backprop_sample(const IncrementalClassifier& clf, const Vector& x, const Vector& dz,
                     LossGradient& out) {
  if (clf.head_kind == HeadKind::Linear) {
    out.grad_weights.noalias() += dz * x.transpose();
    out.grad_bias += dz;
    return;
  }
  const double xn = x.norm();
  if (xn == 0.0) return;
  const Vector xhat = x / xn;
  for (Eigen::Index c = 0; c < clf.weights.rows(); ++c) {
    const double wn = clf.weights.row(c).norm();
    if (wn == 0.0 || dz[c] == 0.0) continue;
    const Vector u = clf.weights.row(c).transpose() / wn;
    const Vector dlogit_dw = (clf.cosine_scale / wn) * (xhat - u.dot(xhat) * u);
    out.grad_weights.row(c) += dz[c] * dlogit_dw.transpose();
  }
}

void add_ewc(const IncrementalClassifier& clf, const EwcState& ewc, double lambda, LossGradient& out) {
  if (lambda == 0.0) return;
  require(ewc.class_count <= clf.class_count() && ewc.dim == clf.dim(), ErrorKind::Shape,
          "EWC anchor does not fit the classifier");
  const Vector theta = flatten_params(clf, ewc.class_count);
  out.loss += ewc_penalty(theta, ewc, lambda);
  const Vector g = lambda * (ewc.fisher_diag.array() * (theta - ewc.theta_star).array()).matrix();
  const auto c = static_cast<Eigen::Index>(ewc.class_count);
  const auto d = static_cast<Eigen::Index>(ewc.dim);
  for (Eigen::Index r = 0; r < c; ++r) out.grad_weights.row(r) += g.segment(r * d, d).transpose();
  out.grad_bias.head(c) += g.tail(c);
}

} // namespace

LossGradient loss_and_gradient(const IncrementalClassifier& clf, const Matrix& X,
                               std::span<const Label> y, const TrainConfig& cfg,
                               const LossTerms& terms) {
  require(X.rows() == static_cast<Eigen::Index>(y.size()), ErrorKind::Shape,
          "feature rows and labels differ in length");
  require(X.rows() > 0, ErrorKind::Argument, "loss over an empty batch");
  require(X.cols() == static_cast<Eigen::Index>(clf.dim()), ErrorKind::Shape, "feature width mismatch");
  const auto classes = static_cast<Label>(clf.class_count());

  LossGradient out;
  out.grad_weights = Matrix::Zero(clf.weights.rows(), clf.weights.cols());
  out.grad_bias = Vector::Zero(clf.bias.size());
  const double inv_b = 1.0 / static_cast<double>(X.rows());

  const bool use_kd = terms.old_head != nullptr && cfg.lambda_lwf != 0.0;
  Eigen::Index old_classes = 0;
  if (use_kd) {
    old_classes = static_cast<Eigen::Index>(terms.old_head->class_count());
    require(old_classes <= static_cast<Eigen::Index>(classes), ErrorKind::Shape,
            "old head has more classes than the new head");
  }
  const double temp = cfg.kd_temperature;

  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Label target = y[static_cast<std::size_t>(i)];
    require(target >= 0 && target < classes, ErrorKind::Argument,
            "label " + std::to_string(target) + " outside the classifier's range");
    const Vector x = X.row(i).transpose();
    const Vector z = clf.logits(x);
    const Vector log_p = log_softmax(z);
    out.loss -= inv_b * log_p[target];
    Vector dz = log_p.array().exp();
    dz[target] -= 1.0;
    dz *= inv_b;

    if (use_kd && old_classes > 0) {
      const Vector z_old = terms.old_head->logits(x);
      const Vector z_new = z.head(old_classes);
      out.loss += inv_b * cfg.lambda_lwf * temp * temp * distillation_kl(z_old, z_new, temp);
      const Vector p = softmax(z_new / temp);
      const Vector q = softmax(z_old / temp);
      dz.head(old_classes) += (inv_b * cfg.lambda_lwf * temp) * (p - q);
    }
    backprop_sample(clf, x, dz, out);
  }

  if (terms.ewc != nullptr) add_ewc(clf, *terms.ewc, cfg.lambda_ewc, out);

  if (cfg.weight_decay != 0.0) {
    out.loss += 0.5 * cfg.weight_decay * clf.weights.squaredNorm();
    out.grad_weights += cfg.weight_decay * clf.weights;
  }
  return out;
}

TrainResult train_linear(const IncrementalClassifier& clf, const Matrix& X, std::span<const Label> y,
                         const TrainConfig& cfg, const IncrementalClassifier* old_head,
                         const EwcState* ewc, const ReplayBuffer* replay) {
  cfg.validate();
  require(X.rows() == static_cast<Eigen::Index>(y.size()), ErrorKind::Shape,
          "feature rows and labels differ in length");

  Matrix data = X;
  LabelVector labels(y.begin(), y.end());
  if (replay != nullptr && replay->total() > 0) {
    const auto [rx, ry] = replay->training_data();
    data.conservativeResize(X.rows() + rx.rows(), X.cols());
    data.bottomRows(rx.rows()) = rx;
    labels.insert(labels.end(), ry.begin(), ry.end());
  }
  require(data.rows() > 0, ErrorKind::Argument, "no training data");

  TrainResult result{clf, {}};
  IncrementalClassifier& head = result.classifier;
  const LossTerms terms{old_head, ewc};
  const auto n = static_cast<std::size_t>(data.rows());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> perm(n);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CounterStream stream(rng::derive_key(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[stream.next_below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      Matrix bx(static_cast<Eigen::Index>(stop - start), data.cols());
      LabelVector by(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        bx.row(static_cast<Eigen::Index>(k - start)) = data.row(static_cast<Eigen::Index>(perm[k]));
        by[k - start] = labels[perm[k]];
      }
      const auto step = loss_and_gradient(head, bx, by, cfg, terms);
      head.weights -= cfg.lr * step.grad_weights;
      head.bias -= cfg.lr * step.grad_bias;
      if (head.head_kind == HeadKind::Cosine) head.weights = normalize_rows(head.weights);
      epoch_loss += step.loss * static_cast<double>(stop - start);
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(n));
  }
  require(head.weights.allFinite() && head.bias.allFinite(), ErrorKind::Numeric,
          "training diverged (non-finite parameters); lower lr or lambda_ewc");
  return result;
}

EwcState compute_fisher(const IncrementalClassifier& clf, const Matrix& X, std::span<const Label> y) {
  require(X.rows() > 0, ErrorKind::Argument, "Fisher information of an empty dataset");
  require(X.rows() == static_cast<Eigen::Index>(y.size()), ErrorKind::Shape,
          "feature rows and labels differ in length");
  TrainConfig plain;
  plain.weight_decay = 0.0;
  EwcState state;
  state.class_count = clf.class_count();
  state.dim = clf.dim();
  state.theta_star = flatten_params(clf);
  state.fisher_diag = Vector::Zero(state.theta_star.size());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Matrix xi = X.row(i);
    const Label yi = y[static_cast<std::size_t>(i)];
    const auto g = loss_and_gradient(clf, xi, std::span<const Label>(&yi, 1), plain).flat();
    state.fisher_diag += g.array().square().matrix();
  }
  state.fisher_diag /= static_cast<double>(X.rows());
  return state;
}

EwcState merge_fisher(const EwcState& old, const EwcState& fresh) {
  require(old.dim == fresh.dim && old.class_count <= fresh.class_count, ErrorKind::Shape,
          "cannot merge EWC anchors of different shapes");
  EwcState out = fresh;
  const auto c_old = static_cast<Eigen::Index>(old.class_count);
  const auto c_new = static_cast<Eigen::Index>(fresh.class_count);
  const auto d = static_cast<Eigen::Index>(fresh.dim);
  out.fisher_diag.head(c_old * d) += old.fisher_diag.head(c_old * d);
  out.fisher_diag.segment(c_new * d, c_old) += old.fisher_diag.tail(c_old);
  return out;
}

} // namespace owlkit
