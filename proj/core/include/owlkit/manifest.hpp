#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "owlkit/embedding.hpp"

namespace owlkit {

enum class SessionRole { BaseTrain, BaseVal, SessionTrain, SessionTest };

std::string_view to_string(SessionRole role);
SessionRole parse_session_role(std::string_view text);

/// One file pair in a manifest. Paths are stored as written; resolve them
/// against the manifest directory with Manifest::resolve.
struct SessionManifest {
  int session_index = 0;
  SessionRole role = SessionRole::BaseTrain;
  std::string feature_path;
  std::optional<std::string> label_path;
  bool labeled = false;

  bool operator==(const SessionManifest&) const = default;
};

struct Manifest {
  std::string dataset;
  int dim = 0;
  std::vector<SessionManifest> sessions;
  std::filesystem::path base_dir;  // directory of manifest.json; not serialized

  /// Entry with the given role and index, if any.
  const SessionManifest* find(SessionRole role, int session_index) const;
  /// Largest session index with a session-train entry (0 if none).
  int last_session() const;

  std::filesystem::path resolve(const std::string& relative) const;

  /// Loads the entry. Labels are attached whenever a label file exists; callers
  /// decide whether to use them (unlabeled session-train labels are
  /// ground truth for evaluation only).
  EmbeddingSet load(const SessionManifest& entry) const;

  void validate() const;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

} // namespace owlkit
