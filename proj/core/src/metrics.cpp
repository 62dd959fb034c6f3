#include "owlkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "owlkit/assignment.hpp"
#include "owlkit/error.hpp"

namespace owlkit::metrics {

namespace {

void require_nonempty(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require(!id_scores.empty() && !ood_scores.empty(), ErrorKind::Argument,
          "detection metrics need at least one ID and one OOD score");
}

void require_same_length(std::size_t a, std::size_t b) {
  require(a == b, ErrorKind::Argument,
          "label vectors differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

// Dense re-indexing of arbitrary label values; returns per-sample codes.
std::vector<std::size_t> encode(std::span<const Label> labels, std::vector<Label>* values = nullptr) {
  std::vector<Label> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::size_t> codes(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    codes[i] = static_cast<std::size_t>(
        std::lower_bound(distinct.begin(), distinct.end(), labels[i]) - distinct.begin());
  }
  if (values) *values = std::move(distinct);
  return codes;
}

struct Contingency {
  Matrix counts;  // rows: a values, cols: b values
  std::vector<Label> a_values;
  std::vector<Label> b_values;
};

Contingency contingency(std::span<const Label> a, std::span<const Label> b) {
  Contingency t;
  const auto ca = encode(a, &t.a_values);
  const auto cb = encode(b, &t.b_values);
  t.counts = Matrix::Zero(static_cast<Eigen::Index>(t.a_values.size()),
                          static_cast<Eigen::Index>(t.b_values.size()));
  for (std::size_t i = 0; i < ca.size(); ++i) {
    t.counts(static_cast<Eigen::Index>(ca[i]), static_cast<Eigen::Index>(cb[i])) += 1.0;
  }
  return t;
}

Assignment match_overlap(const Matrix& overlap) {
  const auto n = std::max(overlap.rows(), overlap.cols());
  Matrix cost = Matrix::Zero(n, n);
  cost.topLeftCorner(overlap.rows(), overlap.cols()) = -overlap;
  return hungarian(cost);
}

} // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores);
  struct Item {
    double score;
    bool is_id;
  };
  std::vector<Item> items;
  items.reserve(id_scores.size() + ood_scores.size());
  for (const double s : id_scores) items.push_back({s, true});
  for (const double s : ood_scores) items.push_back({s, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // Sum of (1-based) midranks of the ID scores.
  double id_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].is_id) id_rank_sum += midrank;
    }
    i = j;
  }
  const auto n_id = static_cast<double>(id_scores.size());
  const auto n_ood = static_cast<double>(ood_scores.size());
  const double u = id_rank_sum - n_id * (n_id + 1.0) / 2.0;
  return u / (n_id * n_ood);
}

double threshold_for_tpr(std::span<const double> scores, double target_tpr) {
  require(!scores.empty(), ErrorKind::State, "no scores to calibrate a threshold on");
  require(target_tpr > 0.0 && target_tpr <= 1.0, ErrorKind::Argument, "target TPR must be in (0, 1]");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto n = static_cast<double>(sorted.size());
  // Smallest k with k / n >= target, evaluated exactly as the postcondition is.
  auto k = static_cast<std::size_t>(std::ceil(target_tpr * n));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  while (k > 1 && static_cast<double>(k - 1) / n >= target_tpr) --k;
  while (k < sorted.size() && static_cast<double>(k) / n < target_tpr) ++k;
  // Ties make #{s >= sorted[k-1]} >= k, so the rate holds; no larger score works
  // because fewer than k scores lie strictly above it.
  return sorted[k - 1];
}

double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double tpr) {
  require_nonempty(id_scores, ood_scores);
  require(tpr > 0.0 && tpr < 1.0, ErrorKind::Argument, "tpr must be in (0, 1)");
  const double tau = threshold_for_tpr(id_scores, tpr);
  const auto accepted = std::count_if(ood_scores.begin(), ood_scores.end(),
                                      [tau](double s) { return s >= tau; });
  return static_cast<double>(accepted) / static_cast<double>(ood_scores.size());
}

double aupr_in(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_nonempty(id_scores, ood_scores);
  struct Item {
    double score;
    bool is_id;
  };
  std::vector<Item> items;
  for (const double s : id_scores) items.push_back({s, true});
  for (const double s : ood_scores) items.push_back({s, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score > b.score; });
  const auto n_pos = static_cast<double>(id_scores.size());
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) {
      (items[j].is_id ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / n_pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

DetectionReport detection_report(std::span<const double> id_scores,
                                 std::span<const double> ood_scores, double tpr) {
  DetectionReport r;
  r.auroc = auroc(id_scores, ood_scores);
  r.aupr_in = aupr_in(id_scores, ood_scores);
  r.fpr_at_tpr = fpr_at_tpr(id_scores, ood_scores, tpr);
  r.tpr_target = tpr;
  r.n_id = id_scores.size();
  r.n_ood = ood_scores.size();
  return r;
}

double accuracy(std::span<const Label> pred, std::span<const Label> truth) {
  require_same_length(pred.size(), truth.size());
  require(!truth.empty(), ErrorKind::Argument, "accuracy of an empty prediction set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

std::map<Label, double> per_class_accuracy(std::span<const Label> pred, std::span<const Label> truth) {
  require_same_length(pred.size(), truth.size());
  require(!truth.empty(), ErrorKind::Argument, "accuracy of an empty prediction set");
  std::map<Label, std::pair<std::size_t, std::size_t>> tally;  // correct, total
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto& [correct, total] = tally[truth[i]];
    correct += pred[i] == truth[i] ? 1 : 0;
    ++total;
  }
  std::map<Label, double> out;
  for (const auto& [label, ct] : tally) {
    out[label] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
  }
  return out;
}

Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> confusion(std::span<const Label> pred,
                                                                      std::span<const Label> truth) {
  require_same_length(pred.size(), truth.size());
  require(!truth.empty(), ErrorKind::Argument, "confusion of an empty prediction set");
  Label max_label = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(pred[i] >= 0 && truth[i] >= 0, ErrorKind::Argument, "confusion needs non-negative labels");
    max_label = std::max({max_label, pred[i], truth[i]});
  }
  const auto c = static_cast<Eigen::Index>(max_label + 1);
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> m =
      Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(c, c);
  for (std::size_t i = 0; i < pred.size(); ++i) m(truth[i], pred[i]) += 1;
  return m;
}

double nmi(std::span<const Label> a, std::span<const Label> b) {
  require_same_length(a.size(), b.size());
  require(!a.empty(), ErrorKind::Argument, "nmi of empty labelings");
  const auto t = contingency(a, b);
  const double n = static_cast<double>(a.size());
  const Vector row_sums = t.counts.rowwise().sum();
  const Vector col_sums = t.counts.colwise().sum().transpose();
  auto entropy = [n](const Vector& counts) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < counts.size(); ++i) {
      if (counts[i] > 0) {
        const double p = counts[i] / n;
        h -= p * std::log(p);
      }
    }
    return h;
  };
  const double ha = entropy(row_sums);
  const double hb = entropy(col_sums);
  double mi = 0.0;
  for (Eigen::Index i = 0; i < t.counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.counts.cols(); ++j) {
      const double nij = t.counts(i, j);
      if (nij > 0) mi += (nij / n) * std::log(n * nij / (row_sums[i] * col_sums[j]));
    }
  }
  const double denom = 0.5 * (ha + hb);
  if (denom <= 0.0) return 1.0;  // both partitions are a single block
  return std::clamp(mi / denom, 0.0, 1.0);
}

double purity(std::span<const Label> clusters, std::span<const Label> truth) {
  require_same_length(clusters.size(), truth.size());
  require(!clusters.empty(), ErrorKind::Argument, "purity of empty labelings");
  const auto t = contingency(clusters, truth);
  return t.counts.rowwise().maxCoeff().sum() / static_cast<double>(clusters.size());
}

double cluster_accuracy(std::span<const Label> clusters, std::span<const Label> truth) {
  require_same_length(clusters.size(), truth.size());
  require(!clusters.empty(), ErrorKind::Argument, "cluster accuracy of empty labelings");
  const auto t = contingency(clusters, truth);
  const auto match = match_overlap(t.counts);
  double matched = 0.0;
  for (Eigen::Index r = 0; r < t.counts.rows(); ++r) {
    const auto c = static_cast<Eigen::Index>(match.row_to_col[static_cast<std::size_t>(r)]);
    if (c < t.counts.cols()) matched += t.counts(r, c);
  }
  return matched / static_cast<double>(clusters.size());
}

std::map<Label, Label> cluster_to_truth_mapping(std::span<const Label> clusters,
                                                std::span<const Label> truth) {
  require_same_length(clusters.size(), truth.size());
  std::map<Label, Label> mapping;
  if (clusters.empty()) return mapping;
  const auto t = contingency(clusters, truth);
  const auto match = match_overlap(t.counts);
  for (Eigen::Index r = 0; r < t.counts.rows(); ++r) {
    const auto c = static_cast<Eigen::Index>(match.row_to_col[static_cast<std::size_t>(r)]);
    if (c < t.counts.cols() && t.counts(r, c) > 0) {
      mapping[t.a_values[static_cast<std::size_t>(r)]] = t.b_values[static_cast<std::size_t>(c)];
    }
  }
  return mapping;
}

double avg_accuracy(std::span<const double> session_accs) {
  require(!session_accs.empty(), ErrorKind::Argument, "average of no sessions");
  return std::accumulate(session_accs.begin(), session_accs.end(), 0.0) /
         static_cast<double>(session_accs.size());
}

double forgetting(const Matrix& acc_matrix) {
  require(acc_matrix.size() > 0 && acc_matrix.rows() == acc_matrix.cols(), ErrorKind::Argument,
          "forgetting needs a non-empty square accuracy matrix");
  const auto tasks = acc_matrix.rows();
  if (tasks == 1) return 0.0;
  double total = 0.0;
  for (Eigen::Index j = 0; j + 1 < tasks; ++j) {
    double best = acc_matrix(j, j);
    for (Eigen::Index t = j; t + 1 < tasks; ++t) best = std::max(best, acc_matrix(t, j));
    total += best - acc_matrix(tasks - 1, j);
  }
  return total / static_cast<double>(tasks - 1);
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = value * scale;
  // Absorb representation error so that e.g. 1.005 rounds to 1.01.
  const double nudge = 1e-9 * std::max(1.0, std::abs(scaled));
  return std::floor(scaled + 0.5 + nudge) / scale;
}

} // namespace owlkit::metrics
