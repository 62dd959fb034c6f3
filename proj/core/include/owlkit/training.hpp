#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "owlkit/classifier.hpp"

namespace owlkit {

enum class Strategy { Ncm, Finetune, Lwf, Ewc, Icarl, FscilProto };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

/// Strategies whose inference is nearest-class-mean rather than head argmax.
bool predicts_with_ncm(Strategy strategy);

struct TrainConfig {
  Strategy strategy = Strategy::Finetune;
  int epochs = 50;
  double lr = 0.01;
  double weight_decay = 5e-4;
  int batch_size = 64;
  double lambda_lwf = 1.0;
  double kd_temperature = 2.0;
  double lambda_ewc = 100.0;
  int replay_budget_m = 20;
  std::uint64_t seed = 0;
  HeadKind head_kind = HeadKind::Linear;
  double cosine_scale = 16.0;

  void validate() const;
};

/// Diagonal Fisher anchor for the first class_count classes of a head.
/// Both vectors use the flatten_params layout of a class_count-class head.
struct EwcState {
  std::size_t class_count = 0;
  std::size_t dim = 0;
  Vector fisher_diag;
  Vector theta_star;

  bool operator==(const EwcState& other) const;
};

/// W row-major, then b, for the first class_limit classes (all when absent).
Vector flatten_params(const IncrementalClassifier& clf, std::optional<std::size_t> class_limit = {});
void unflatten_params(IncrementalClassifier& clf, const Vector& theta);

/// (lambda / 2) * sum_i F_i (theta_i - theta*_i)^2
double ewc_penalty(const Vector& theta, const EwcState& ewc, double lambda);

/// Optional loss terms beyond cross-entropy. Null pointers disable a term.
struct LossTerms {
  const IncrementalClassifier* old_head = nullptr;  // LwF / iCaRL distillation
  const EwcState* ewc = nullptr;
};

struct LossGradient {
  double loss = 0.0;
  Matrix grad_weights;  // C x d
  Vector grad_bias;     // C

  Vector flat() const;
};

/// Mean CE over the batch [+ lambda_lwf T^2 mean KL(old || new) on old classes]
/// [+ EWC penalty] + (weight_decay / 2) ||W||^2, and its exact gradient.
LossGradient loss_and_gradient(const IncrementalClassifier& clf, const Matrix& X,
                               std::span<const Label> y, const TrainConfig& cfg,
                               const LossTerms& terms = {});

/// Temperature-scaled KL(softmax(old/T) || softmax(new/T)), unweighted.
double distillation_kl(const Vector& old_logits, const Vector& new_logits, double temperature);

struct ReplayBuffer;

struct TrainResult {
  IncrementalClassifier classifier;
  std::vector<double> loss_trace;  // mean loss per epoch
};

/// Mini-batch SGD without momentum. Each epoch's shuffle is drawn from the
/// counter stream keyed by (seed, epoch). Replay exemplars, when given, are
/// appended to the training set.
TrainResult train_linear(const IncrementalClassifier& clf, const Matrix& X, std::span<const Label> y,
                         const TrainConfig& cfg, const IncrementalClassifier* old_head = nullptr,
                         const EwcState* ewc = nullptr, const ReplayBuffer* replay = nullptr);

/// Empirical Fisher diagonal: mean of squared per-sample gradients of log p(y|x).
EwcState compute_fisher(const IncrementalClassifier& clf, const Matrix& X, std::span<const Label> y);

/// Anchor covering `fresh.class_count` classes: old Fisher (zero-padded) plus
/// the fresh Fisher, anchored at the fresh theta*.
EwcState merge_fisher(const EwcState& old, const EwcState& fresh);

/// Numerically stable softmax / log-softmax.
Vector softmax(const Vector& logits);
Vector log_softmax(const Vector& logits);

} // namespace owlkit
