#pragma once

// Independent reference implementations used to check the library. They are
// written for clarity, not speed, and share no code with core/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace oracle {

// ---- NPY ------------------------------------------------------------------

struct NpyFile {
  std::string descr;
  bool fortran = false;
  std::vector<std::uint64_t> shape;
  std::vector<unsigned char> payload;
};

inline NpyFile read_npy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("oracle: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  static const unsigned char magic[] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  if (bytes.size() < 10 || !std::equal(magic, magic + 6, bytes.begin()))
    throw std::runtime_error("oracle: bad magic");
  if (bytes[6] != 1 || bytes[7] != 0) throw std::runtime_error("oracle: not version 1.0");
  const std::size_t header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
  if ((10 + header_len) % 64 != 0) throw std::runtime_error("oracle: header not 64-byte aligned");
  const std::string header(bytes.begin() + 10, bytes.begin() + 10 + static_cast<long>(header_len));
  if (header.back() != '\n') throw std::runtime_error("oracle: header not newline-terminated");

  NpyFile out;
  std::smatch m;
  if (!std::regex_search(header, m, std::regex("'descr'\\s*:\\s*'([^']+)'")))
    throw std::runtime_error("oracle: no descr");
  out.descr = m[1];
  if (!std::regex_search(header, m, std::regex("'fortran_order'\\s*:\\s*(True|False)")))
    throw std::runtime_error("oracle: no fortran_order");
  out.fortran = m[1] == "True";
  if (!std::regex_search(header, m, std::regex("'shape'\\s*:\\s*\\(([^)]*)\\)")))
    throw std::runtime_error("oracle: no shape");
  const std::string dims = m[1];
  const std::regex number("\\d+");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), number); it != std::sregex_iterator(); ++it)
    out.shape.push_back(std::stoull(it->str()));
  out.payload.assign(bytes.begin() + 10 + static_cast<long>(header_len), bytes.end());
  return out;
}

template <typename T>
std::vector<T> npy_values(const NpyFile& f) {
  std::vector<T> v(f.payload.size() / sizeof(T));
  if (v.size() * sizeof(T) != f.payload.size()) throw std::runtime_error("oracle: ragged payload");
  std::memcpy(v.data(), f.payload.data(), f.payload.size());
  return v;
}

// ---- detection ------------------------------------------------------------

inline double pairwise_auroc(const std::vector<double>& id, const std::vector<double>& ood) {
  long double wins = 0;
  for (double a : id)
    for (double b : ood) wins += a > b ? 1.0L : (a == b ? 0.5L : 0.0L);
  return static_cast<double>(wins / (static_cast<long double>(id.size()) * static_cast<long double>(ood.size())));
}

// Exhaustive scan: the largest candidate tau among the scores with TPR >= target.
inline double scan_threshold(const std::vector<double>& scores, double target) {
  double best = -std::numeric_limits<double>::infinity();
  for (double tau : scores) {
    const auto hits = std::count_if(scores.begin(), scores.end(), [&](double s) { return s >= tau; });
    if (static_cast<double>(hits) / static_cast<double>(scores.size()) >= target) best = std::max(best, tau);
  }
  return best;
}

inline double scan_fpr(const std::vector<double>& id, const std::vector<double>& ood, double target) {
  const double tau = scan_threshold(id, target);
  const auto fp = std::count_if(ood.begin(), ood.end(), [&](double s) { return s >= tau; });
  return static_cast<double>(fp) / static_cast<double>(ood.size());
}

inline double softmax_max(const std::vector<double>& z) {
  long double denom = 0;
  long double top = -std::numeric_limits<long double>::infinity();
  for (double v : z) {
    denom += std::exp(static_cast<long double>(v));
    top = std::max(top, std::exp(static_cast<long double>(v)));
  }
  return static_cast<double>(top / denom);
}

// ---- assignment -----------------------------------------------------------

inline double brute_force_assignment(const Eigen::MatrixXd& cost) {
  std::vector<int> perm(static_cast<std::size_t>(cost.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0;
    for (std::size_t r = 0; r < perm.size(); ++r) total += cost(static_cast<long>(r), perm[r]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// ---- clustering -----------------------------------------------------------

inline double naive_nmi(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::map<std::pair<std::int64_t, std::int64_t>, long double> joint;
  std::map<std::int64_t, long double> pa, pb;
  const long double n = static_cast<long double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    pa[a[i]] += 1;
    pb[b[i]] += 1;
  }
  long double ha = 0, hb = 0, mi = 0;
  for (auto& [k, c] : pa) ha -= (c / n) * std::log(c / n);
  for (auto& [k, c] : pb) hb -= (c / n) * std::log(c / n);
  for (auto& [k, c] : joint) mi += (c / n) * std::log((c / n) / ((pa[k.first] / n) * (pb[k.second] / n)));
  if (ha == 0 && hb == 0) return 1.0;
  return static_cast<double>(mi / ((ha + hb) / 2));
}

inline double naive_purity(const std::vector<std::int64_t>& clusters, const std::vector<std::int64_t>& truth) {
  std::map<std::int64_t, std::map<std::int64_t, int>> table;
  for (std::size_t i = 0; i < clusters.size(); ++i) ++table[clusters[i]][truth[i]];
  long total = 0;
  for (auto& [c, row] : table) {
    int best = 0;
    for (auto& [t, n] : row) best = std::max(best, n);
    total += best;
  }
  return static_cast<double>(total) / static_cast<double>(clusters.size());
}

// Best one-to-one matching by trying every injective map of the smaller side.
inline double brute_force_cluster_accuracy(const std::vector<std::int64_t>& clusters,
                                           const std::vector<std::int64_t>& truth) {
  std::set<std::int64_t> cset(clusters.begin(), clusters.end()), tset(truth.begin(), truth.end());
  std::vector<std::int64_t> cv(cset.begin(), cset.end()), tv(tset.begin(), tset.end());
  const std::size_t n = std::max(cv.size(), tv.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  long best = 0;
  do {
    long hits = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      const auto ci = static_cast<std::size_t>(std::find(cv.begin(), cv.end(), clusters[i]) - cv.begin());
      const auto ti = static_cast<std::size_t>(perm[ci]);
      if (ti < tv.size() && tv[ti] == truth[i]) ++hits;
    }
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(clusters.size());
}

// ---- numerics -------------------------------------------------------------

// Central differences of f around theta.
template <typename F>
Eigen::VectorXd central_difference(F&& f, const Eigen::VectorXd& theta, double step) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd up = theta, down = theta;
    up(i) += step;
    down(i) -= step;
    g(i) = (f(up) - f(down)) / (2 * step);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

// Standard normal upper tail.
inline double normal_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

} // namespace oracle
