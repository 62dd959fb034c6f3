#include "owlkit/manifest.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "owlkit/error.hpp"

namespace owlkit {

using nlohmann::json;

std::string_view to_string(SessionRole role) {
  switch (role) {
    case SessionRole::BaseTrain: return "base-train";
    case SessionRole::BaseVal: return "base-val";
    case SessionRole::SessionTrain: return "session-train";
    case SessionRole::SessionTest: return "session-test";
  }
  return "";
}

SessionRole parse_session_role(std::string_view text) {
  if (text == "base-train") return SessionRole::BaseTrain;
  if (text == "base-val") return SessionRole::BaseVal;
  if (text == "session-train") return SessionRole::SessionTrain;
  if (text == "session-test") return SessionRole::SessionTest;
  fail(ErrorKind::Format, "unknown session role '" + std::string(text) + "'");
}

const SessionManifest* Manifest::find(SessionRole role, int session_index) const {
  for (const auto& s : sessions) {
    if (s.role == role && s.session_index == session_index) return &s;
  }
  return nullptr;
}

int Manifest::last_session() const {
  int last = 0;
  for (const auto& s : sessions) {
    if (s.role == SessionRole::SessionTrain) last = std::max(last, s.session_index);
  }
  return last;
}

std::filesystem::path Manifest::resolve(const std::string& relative) const {
  const std::filesystem::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

EmbeddingSet Manifest::load(const SessionManifest& entry) const {
  std::optional<std::filesystem::path> labels;
  if (entry.label_path) labels = resolve(*entry.label_path);
  auto set = load_embeddings(resolve(entry.feature_path), labels);
  require(dim == 0 || set.dim() == static_cast<std::size_t>(dim), ErrorKind::Shape,
          entry.feature_path + " has dimension " + std::to_string(set.dim()) +
              " but the manifest declares " + std::to_string(dim));
  return set;
}

void Manifest::validate() const {
  require(dim >= 1, ErrorKind::Format, "manifest dim must be >= 1");
  for (const auto& s : sessions) {
    require(s.session_index >= 0, ErrorKind::Format, "session_index must be non-negative");
    if (s.role == SessionRole::BaseTrain || s.role == SessionRole::BaseVal) {
      require(s.labeled && s.label_path.has_value(), ErrorKind::Format,
              std::string(to_string(s.role)) + " entries must be labeled");
    }
    if (s.labeled) {
      require(s.label_path.has_value(), ErrorKind::Format,
              "labeled entry " + s.feature_path + " has no label_path");
    }
  }
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest " + path.string());
  Manifest m;
  try {
    const json doc = json::parse(in);
    m.dataset = doc.at("dataset").get<std::string>();
    m.dim = doc.at("dim").get<int>();
    for (const auto& e : doc.at("sessions")) {
      SessionManifest s;
      s.session_index = e.at("session_index").get<int>();
      s.role = parse_session_role(e.at("role").get<std::string>());
      s.feature_path = e.at("feature_path").get<std::string>();
      if (e.contains("label_path") && !e.at("label_path").is_null()) {
        s.label_path = e.at("label_path").get<std::string>();
      }
      s.labeled = e.at("labeled").get<bool>();
      m.sessions.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  m.base_dir = path.parent_path();
  m.validate();
  return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  json doc;
  doc["dataset"] = manifest.dataset;
  doc["dim"] = manifest.dim;
  doc["sessions"] = json::array();
  for (const auto& s : manifest.sessions) {
    json e;
    e["session_index"] = s.session_index;
    e["role"] = std::string(to_string(s.role));
    e["feature_path"] = s.feature_path;
    e["label_path"] = s.label_path ? json(*s.label_path) : json(nullptr);
    e["labeled"] = s.labeled;
    doc["sessions"].push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorKind::Io, "failed writing manifest " + path.string());
}

} // namespace owlkit
