#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "owlkit/embedding.hpp"
#include "owlkit/manifest.hpp"

namespace owlkit::synth {

struct SessionSpec {
  int novel_classes = 0;
  double known_fraction = 0.5;
  int samples_per_class = 100;  // per novel class
};

/// Gaussian-mixture open-world scenario. Class ids are dense: base classes
/// first, then each session's novel classes in session order.
struct ScenarioSpec {
  int dim = 16;
  int base_classes = 5;
  std::vector<SessionSpec> sessions;
  double separation = 8.0;  // minimum center distance, in units of sigma
  double sigma = 1.0;
  std::uint64_t seed = 0;
  int base_samples_per_class = 100;
  int test_samples_per_class = 100;

  int total_classes() const;
  void validate() const;
};

struct SessionData {
  EmbeddingSet train;  // novel and known samples; labels are ground truth
  EmbeddingSet test;   // every class seen through this session
  std::vector<Label> novel_classes;
};

struct Scenario {
  Matrix centers;                  // total_classes x dim
  std::vector<int> class_session;  // session introducing each class (0 = base)
  EmbeddingSet base_train;
  EmbeddingSet base_val;
  std::vector<SessionData> sessions;  // sessions[t - 1] is session t
};

/// Centers are a * z for distinct binary z of a fixed weight w, with
/// a = separation * sigma / sqrt(2), so any two centers are at least
/// separation * sigma apart. w is the smallest weight giving enough distinct
/// patterns; if even w = dim / 2 does not, the spec is an argument error.
///
/// Session t holds samples_per_class samples of each novel class and
/// round_half_up(known_fraction * N) samples of earlier classes (spread
/// round-robin), N being the session total. Sessions without novel classes
/// hold samples_per_class samples of every earlier class.
///
/// Every sample is center + sigma * n, with n drawn from a counter stream keyed
/// by (seed, split, class), so output is identical on every platform.
Scenario generate(const ScenarioSpec& spec);

/// Writes every split as NPY files under `dir` plus manifest.json, and returns
/// the manifest. Session-train entries are marked unlabeled; their label files
/// are ground truth for evaluation.
Manifest write_scenario(const Scenario& scenario, const ScenarioSpec& spec, const std::filesystem::path& dir,
                        const std::string& dataset = "synth");

/// Number of known-class samples in a session with `novel_samples` novel ones.
std::size_t known_sample_count(std::size_t novel_samples, double known_fraction);

} // namespace owlkit::synth
