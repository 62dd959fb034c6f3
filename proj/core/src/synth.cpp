#include "owlkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "owlkit/error.hpp"
#include "owlkit/rng.hpp"

namespace owlkit::synth {

namespace {

constexpr std::uint64_t kCenterTag = 0xC3A7E5ULL << 32;
constexpr std::uint64_t kTestTag = (0xC3A7E5ULL << 32) + 1;

// C(n, k), saturating at `cap`.
std::uint64_t binomial_capped(int n, int k, std::uint64_t cap) {
  std::uint64_t value = 1;
  for (int i = 1; i <= k; ++i) {
    value = value * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    if (value >= cap) return cap;
  }
  return value;
}

Matrix lattice_centers(const ScenarioSpec& spec) {
  const int total = spec.total_classes();
  const auto needed = static_cast<std::uint64_t>(total);
  int weight = 0;
  while (weight <= spec.dim / 2 && binomial_capped(spec.dim, weight, needed) < needed) ++weight;
  require(weight <= spec.dim / 2, ErrorKind::Argument,
          std::to_string(total) + " classes do not fit the lattice in dimension " + std::to_string(spec.dim));

  const double scale = spec.separation * spec.sigma / std::sqrt(2.0);
  CounterStream stream(rng::derive_key(spec.seed, kCenterTag));
  std::set<std::vector<int>> used;
  Matrix centers = Matrix::Zero(total, spec.dim);
  std::vector<int> coords(static_cast<std::size_t>(spec.dim));
  for (int c = 0; c < total;) {
    std::iota(coords.begin(), coords.end(), 0);
    for (int i = 0; i < weight; ++i) {
      const auto j = i + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(spec.dim - i)));
      std::swap(coords[static_cast<std::size_t>(i)], coords[static_cast<std::size_t>(j)]);
    }
    std::vector<int> pattern(coords.begin(), coords.begin() + weight);
    std::sort(pattern.begin(), pattern.end());
    if (!used.insert(pattern).second) continue;
    for (const int j : pattern) centers(c, j) = scale;
    ++c;
  }
  return centers;
}

// Draws `count` samples of class `label` from the stream keyed by (seed, split, label).
void draw_samples(const ScenarioSpec& spec, const Matrix& centers, std::uint64_t split, Label label,
                  std::size_t count, std::vector<Vector>& rows, LabelVector& labels) {
  CounterStream stream(rng::derive_key(rng::derive_key(spec.seed, split), static_cast<std::uint64_t>(label)));
  for (std::size_t s = 0; s < count; ++s) {
    Vector x = centers.row(label).transpose();
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) += spec.sigma * stream.next_normal();
    rows.push_back(std::move(x));
    labels.push_back(label);
  }
}

EmbeddingSet assemble(const std::vector<Vector>& rows, LabelVector labels, int dim) {
  Matrix X(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return EmbeddingSet::from_matrix(X, std::move(labels));
}

EmbeddingSet test_split(const ScenarioSpec& spec, const Matrix& centers, Label classes) {
  std::vector<Vector> rows;
  LabelVector labels;
  for (Label c = 0; c < classes; ++c) {
    draw_samples(spec, centers, kTestTag, c, static_cast<std::size_t>(spec.test_samples_per_class), rows, labels);
  }
  return assemble(rows, std::move(labels), spec.dim);
}

} // namespace

int ScenarioSpec::total_classes() const {
  int total = base_classes;
  for (const auto& s : sessions) total += s.novel_classes;
  return total;
}

void ScenarioSpec::validate() const {
  require(dim >= 1, ErrorKind::Argument, "dim must be at least 1");
  require(base_classes >= 2, ErrorKind::Argument, "base_classes must be at least 2");
  require(separation > 0.0, ErrorKind::Argument, "separation must be positive");
  require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::Argument, "sigma must be positive");
  require(base_samples_per_class >= 1 && test_samples_per_class >= 1, ErrorKind::Argument,
          "per-class sample counts must be positive");
  for (std::size_t t = 0; t < sessions.size(); ++t) {
    const auto& s = sessions[t];
    const auto where = "session " + std::to_string(t + 1) + ": ";
    require(s.novel_classes >= 0, ErrorKind::Argument, where + "novel_classes must be non-negative");
    require(s.samples_per_class >= 1, ErrorKind::Argument, where + "samples_per_class must be positive");
    require(s.known_fraction >= 0.0 && s.known_fraction <= 1.0, ErrorKind::Argument,
            where + "known_fraction must lie in [0, 1]");
    require(s.novel_classes == 0 || s.known_fraction < 1.0, ErrorKind::Argument,
            where + "known_fraction 1 leaves no room for novel classes");
  }
}

std::size_t known_sample_count(std::size_t novel_samples, double known_fraction) {
  if (known_fraction <= 0.0) return 0;
  const double exact = static_cast<double>(novel_samples) * known_fraction / (1.0 - known_fraction);
  return static_cast<std::size_t>(std::floor(exact + 0.5 + 1e-9));
}

Scenario generate(const ScenarioSpec& spec) {
  spec.validate();
  Scenario out;
  out.centers = lattice_centers(spec);
  out.class_session.assign(static_cast<std::size_t>(spec.base_classes), 0);

  {
    std::vector<Vector> rows;
    LabelVector labels;
    for (Label c = 0; c < spec.base_classes; ++c) {
      draw_samples(spec, out.centers, 0, c, static_cast<std::size_t>(spec.base_samples_per_class), rows, labels);
    }
    out.base_train = assemble(rows, std::move(labels), spec.dim);
    out.base_val = test_split(spec, out.centers, spec.base_classes);
  }

  Label seen = spec.base_classes;
  for (std::size_t t = 0; t < spec.sessions.size(); ++t) {
    const auto& s = spec.sessions[t];
    const auto split = static_cast<std::uint64_t>(t + 1);
    SessionData data;
    std::vector<Vector> rows;
    LabelVector labels;
    const auto per_class = static_cast<std::size_t>(s.samples_per_class);
    for (int n = 0; n < s.novel_classes; ++n) {
      const Label c = seen + n;
      data.novel_classes.push_back(c);
      out.class_session.push_back(static_cast<int>(t + 1));
      draw_samples(spec, out.centers, split, c, per_class, rows, labels);
    }
    const auto known = s.novel_classes == 0
                           ? per_class * static_cast<std::size_t>(seen)
                           : known_sample_count(per_class * static_cast<std::size_t>(s.novel_classes),
                                                s.known_fraction);
    std::vector<std::size_t> per_known(static_cast<std::size_t>(seen), 0);
    for (std::size_t j = 0; j < known; ++j) ++per_known[j % per_known.size()];
    for (Label c = 0; c < seen; ++c) {
      draw_samples(spec, out.centers, split, c, per_known[static_cast<std::size_t>(c)], rows, labels);
    }
    seen += s.novel_classes;
    data.train = assemble(rows, std::move(labels), spec.dim);
    data.test = test_split(spec, out.centers, seen);
    out.sessions.push_back(std::move(data));
  }
  return out;
}

Manifest write_scenario(const Scenario& scenario, const ScenarioSpec& spec, const std::filesystem::path& dir,
                        const std::string& dataset) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  Manifest manifest;
  manifest.dataset = dataset;
  manifest.dim = spec.dim;
  manifest.base_dir = dir;
  auto emit = [&](const EmbeddingSet& set, const std::string& stem, int index, SessionRole role, bool labeled) {
    const auto features = stem + "_features.npy";
    const auto labels = stem + "_labels.npy";
    save_embeddings(set, dir / features, dir / labels);
    manifest.sessions.push_back({index, role, features, labels, labeled});
  };
  emit(scenario.base_train, "base_train", 0, SessionRole::BaseTrain, true);
  emit(scenario.base_val, "base_val", 0, SessionRole::BaseVal, true);
  for (std::size_t t = 0; t < scenario.sessions.size(); ++t) {
    const int index = static_cast<int>(t + 1);
    const auto stem = "session_" + std::to_string(index);
    emit(scenario.sessions[t].train, stem + "_train", index, SessionRole::SessionTrain, false);
    emit(scenario.sessions[t].test, stem + "_test", index, SessionRole::SessionTest, true);
  }
  save_manifest(manifest, dir / "manifest.json");
  return manifest;
}

} // namespace owlkit::synth
