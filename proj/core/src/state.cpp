#include "owlkit/state.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "owlkit/error.hpp"
#include "owlkit/npy.hpp"

namespace owlkit {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineState::validate() const {
  registry.validate();
  classifier().validate();
  require(classifier().class_count() == registry.size(), ErrorKind::Consistency,
          "classifier has " + std::to_string(classifier().class_count()) + " outputs but the registry holds " +
              std::to_string(registry.size()) + " classes");
  require(scorer.class_count == registry.size(), ErrorKind::Consistency,
          "scorer covers a different number of classes than the registry");
  for (std::size_t i = 0; i < session_logs.size(); ++i) {
    require(session_logs[i].session_index == static_cast<int>(i), ErrorKind::Consistency,
            "session logs are not ordered by session index without gaps");
  }
}

namespace {

// Flat f64 stream writer/reader used for the tensor files.
struct Flat {
  std::vector<double> data;
  void put(double v) { data.push_back(v); }
  void put(const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  void put(const Vector& v) { data.insert(data.end(), v.data(), v.data() + v.size()); }
};

struct Reader {
  std::vector<double> data;
  std::size_t pos = 0;
  std::string what;

  double take() {
    require(pos < data.size(), ErrorKind::Format, what + " is truncated");
    return data[pos++];
  }
  std::size_t take_count() {
    const double v = take();
    require(v >= 0.0 && v == static_cast<double>(static_cast<std::size_t>(v)), ErrorKind::Format,
            what + " holds an invalid size field");
    return static_cast<std::size_t>(v);
  }
  Matrix matrix(std::size_t rows, std::size_t cols) {
    require(rows * cols <= data.size() - pos, ErrorKind::Format, what + " is truncated");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[pos++];
    return m;
  }
  Vector vector(std::size_t n) {
    require(n <= data.size() - pos, ErrorKind::Format, what + " is truncated");
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = data[pos++];
    return v;
  }
  void finish() const { require(pos == data.size(), ErrorKind::Format, what + " has trailing values"); }
};

void write_flat(const fs::path& path, const Flat& flat) {
  npy::write(path, npy::Array::from<double>(flat.data, {flat.data.size()}));
}

Reader read_flat(const fs::path& path) {
  const auto array = npy::read(path);
  require(array.dtype == npy::DType::Float64 && array.shape.size() == 1, ErrorKind::Format,
          path.string() + ": expected a 1-D '<f8' array");
  return Reader{array.values<double>(), 0, path.filename().string()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

json log_json(const SessionLog& log) {
  return json{{"session_index", log.session_index},
              {"n_input", log.n_input},
              {"n_flagged_ood", log.n_flagged_ood},
              {"discovered_k", log.discovered_k},
              {"new_class_ids", log.new_class_ids},
              {"class_count", log.class_count},
              {"threshold", log.threshold},
              {"id_acc", optional_json(log.id_acc)},
              {"ood_acc", optional_json(log.ood_acc)},
              {"unknown_recall", optional_json(log.unknown_recall)},
              {"session_acc", log.session_acc},
              {"avg", log.avg},
              {"cluster_acc", optional_json(log.cluster_acc)},
              {"nmi", optional_json(log.nmi)}};
}

SessionLog log_from(const json& j) {
  SessionLog log;
  log.session_index = j.at("session_index").get<int>();
  log.n_input = j.at("n_input").get<std::size_t>();
  log.n_flagged_ood = j.at("n_flagged_ood").get<std::size_t>();
  log.discovered_k = j.at("discovered_k").get<std::size_t>();
  log.new_class_ids = j.at("new_class_ids").get<LabelVector>();
  log.class_count = j.at("class_count").get<std::size_t>();
  log.threshold = j.at("threshold").get<double>();
  log.id_acc = optional_from<double>(j.at("id_acc"));
  log.ood_acc = optional_from<double>(j.at("ood_acc"));
  log.unknown_recall = optional_from<double>(j.at("unknown_recall"));
  log.session_acc = j.at("session_acc").get<double>();
  log.avg = j.at("avg").get<double>();
  log.cluster_acc = optional_from<double>(j.at("cluster_acc"));
  log.nmi = optional_from<double>(j.at("nmi"));
  return log;
}

json registry_json(const ClassRegistry& registry) {
  json entries = json::array();
  for (const auto& e : registry.entries()) {
    entries.push_back(json{{"class_id", e.class_id},
                           {"origin_session", e.origin_session},
                           {"discovered", e.discovered},
                           {"count", e.count},
                           {"true_label", e.true_label},
                           {"prototype", vector_json(e.prototype)}});
  }
  return json{{"classes", entries}};
}

ClassRegistry registry_from(const json& j) {
  ClassRegistry registry;
  for (const auto& e : j.at("classes")) {
    const auto id = registry.add(e.at("origin_session").get<int>(), e.at("discovered").get<bool>(),
                                 vector_from(e.at("prototype")), e.at("count").get<std::int64_t>(),
                                 e.at("true_label").get<Label>());
    require(id == e.at("class_id").get<Label>(), ErrorKind::Consistency, "registry class ids are not dense");
  }
  return registry;
}

// Scorer blocks in scorer.npy order.
struct Block {
  const char* name;
  Matrix FittedScorer::*field;
};
constexpr Block kMatrixBlocks[] = {
    {"class_means", &FittedScorer::class_means},
    {"shared_covariance", &FittedScorer::shared_covariance},
    {"shared_precision_factor", &FittedScorer::shared_precision_factor},
    {"feature_covariance", &FittedScorer::feature_covariance},
    {"principal_basis", &FittedScorer::principal_basis},
    {"train_features", &FittedScorer::train_features},
    {"calibration_features", &FittedScorer::calibration_features},
};

json scorer_meta(const FittedScorer& s, Flat& flat) {
  const auto& c = s.config;
  json blocks = json::array();
  for (const auto& b : kMatrixBlocks) {
    const Matrix& m = s.*(b.field);
    blocks.push_back(json{{"name", b.name}, {"rows", m.rows()}, {"cols", m.cols()}});
    flat.put(m);
  }
  blocks.push_back(json{{"name", "feature_mean"}, {"rows", s.feature_mean.size()}, {"cols", 1}});
  flat.put(s.feature_mean);
  blocks.push_back(json{{"name", "id_val_scores"}, {"rows", s.id_val_scores.size()}, {"cols", 1}});
  flat.data.insert(flat.data.end(), s.id_val_scores.begin(), s.id_val_scores.end());
  blocks.push_back(json{{"name", "scalars"}, {"rows", 3}, {"cols", 1}});
  flat.put(s.alpha);
  flat.put(s.threshold);
  flat.put(s.target_tpr);
  return json{{"method", to_string(c.method)},
              {"temperature", optional_json(c.temperature)},
              {"vim_variance_target", c.vim_variance_target},
              {"vim_dim_override", optional_json(c.vim_dim_override)},
              {"knn_k", c.knn_k},
              {"shrinkage_scale", c.shrinkage_scale},
              {"class_count", s.class_count},
              {"dim", s.dim},
              {"fit_count", s.fit_count},
              {"calibrated", s.calibrated},
              {"blocks", blocks}};
}

FittedScorer scorer_from(const json& meta, Reader& r) {
  FittedScorer s;
  auto& c = s.config;
  c.method = parse_score_method(meta.at("method").get<std::string>());
  c.temperature = optional_from<double>(meta.at("temperature"));
  c.vim_variance_target = meta.at("vim_variance_target").get<double>();
  c.vim_dim_override = optional_from<int>(meta.at("vim_dim_override"));
  c.knn_k = meta.at("knn_k").get<int>();
  c.shrinkage_scale = meta.at("shrinkage_scale").get<double>();
  s.class_count = meta.at("class_count").get<std::size_t>();
  s.dim = meta.at("dim").get<std::size_t>();
  s.fit_count = meta.at("fit_count").get<std::size_t>();
  s.calibrated = meta.at("calibrated").get<bool>();

  const auto& blocks = meta.at("blocks");
  constexpr std::size_t n_matrix = std::size(kMatrixBlocks);
  require(blocks.is_array() && blocks.size() == n_matrix + 3, ErrorKind::Format,
          "state.json lists an unexpected number of scorer blocks");
  auto shape = [&](std::size_t i, const char* name) {
    const auto& b = blocks[i];
    require(b.at("name").get<std::string>() == name, ErrorKind::Format,
            std::string("scorer block ") + std::to_string(i) + " should be " + name);
    return std::pair{b.at("rows").get<std::size_t>(), b.at("cols").get<std::size_t>()};
  };
  for (std::size_t i = 0; i < n_matrix; ++i) {
    const auto [rows, cols] = shape(i, kMatrixBlocks[i].name);
    s.*(kMatrixBlocks[i].field) = r.matrix(rows, cols);
  }
  s.feature_mean = r.vector(shape(n_matrix, "feature_mean").first);
  const Vector scores = r.vector(shape(n_matrix + 1, "id_val_scores").first);
  s.id_val_scores.assign(scores.data(), scores.data() + scores.size());
  require(shape(n_matrix + 2, "scalars").first == 3, ErrorKind::Format, "scorer scalars block has the wrong size");
  s.alpha = r.take();
  s.threshold = r.take();
  s.target_tpr = r.take();
  r.finish();
  return s;
}

Flat classifier_flat(const IncrementalClassifier& clf) {
  Flat f;
  f.put(static_cast<double>(clf.class_count()));
  f.put(static_cast<double>(clf.dim()));
  f.put(clf.head_kind == HeadKind::Cosine ? 1.0 : 0.0);
  f.put(clf.cosine_scale);
  f.put(clf.weights);
  f.put(clf.bias);
  f.put(clf.prototypes);
  return f;
}

IncrementalClassifier classifier_from(Reader r) {
  IncrementalClassifier clf;
  const auto C = r.take_count();
  const auto d = r.take_count();
  const double kind = r.take();
  require(kind == 0.0 || kind == 1.0, ErrorKind::Format, "classifier.npy has an unknown head kind");
  clf.head_kind = kind == 1.0 ? HeadKind::Cosine : HeadKind::Linear;
  clf.cosine_scale = r.take();
  clf.weights = r.matrix(C, d);
  clf.bias = r.vector(C);
  clf.prototypes = r.matrix(C, d);
  r.finish();
  return clf;
}

Flat replay_flat(const ReplayBuffer& replay) {
  Flat f;
  f.put(static_cast<double>(replay.classes.size()));
  for (const auto& c : replay.classes) {
    f.put(static_cast<double>(c.class_id));
    f.put(static_cast<double>(c.features.rows()));
    f.put(static_cast<double>(c.features.cols()));
    f.put(c.features);
  }
  return f;
}

ReplayBuffer replay_from(Reader r) {
  ReplayBuffer replay;
  const auto n = r.take_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<Label>(r.take_count());
    const auto rows = r.take_count();
    const auto cols = r.take_count();
    replay.classes.push_back({id, r.matrix(rows, cols)});
  }
  r.finish();
  return replay;
}

Flat ewc_flat(const EwcState& ewc) {
  Flat f;
  f.put(static_cast<double>(ewc.class_count));
  f.put(static_cast<double>(ewc.dim));
  f.put(static_cast<double>(ewc.fisher_diag.size()));
  f.put(ewc.fisher_diag);
  f.put(ewc.theta_star);
  return f;
}

EwcState ewc_from(Reader r) {
  EwcState ewc;
  ewc.class_count = r.take_count();
  ewc.dim = r.take_count();
  const auto n = r.take_count();
  ewc.fisher_diag = r.vector(n);
  ewc.theta_star = r.vector(n);
  r.finish();
  return ewc;
}

} // namespace

std::string logs_to_json(const std::vector<SessionLog>& logs) {
  json arr = json::array();
  for (const auto& log : logs) arr.push_back(log_json(log));
  return arr.dump(2) + "\n";
}

std::vector<SessionLog> logs_from_json(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("logs.json: ") + e.what());
  }
  require(arr.is_array(), ErrorKind::Format, "logs.json must hold an array");
  std::vector<SessionLog> logs;
  try {
    for (const auto& j : arr) logs.push_back(log_from(j));
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("logs.json: ") + e.what());
  }
  return logs;
}

void save_state(const PipelineState& state, const fs::path& dir) {
  state.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create state directory " + dir.string() + ": " + ec.message());

  Flat scorer_blocks;
  const auto& clf = state.classifier();
  json meta{{"version", kStateVersion},
            {"rng_seed", state.rng_seed},
            {"classifier", {{"class_count", clf.class_count()},
                            {"dim", clf.dim()},
                            {"head_kind", to_string(clf.head_kind)},
                            {"cosine_scale", clf.cosine_scale}}},
            {"scorer", scorer_meta(state.scorer, scorer_blocks)},
            {"replay", !state.learner.replay.classes.empty()},
            {"ewc", state.learner.ewc.has_value()}};

  write_flat(dir / "classifier.npy", classifier_flat(clf));
  write_flat(dir / "scorer.npy", scorer_blocks);
  const auto replay_path = dir / "replay.npy";
  const auto ewc_path = dir / "ewc.npy";
  if (!state.learner.replay.classes.empty()) {
    write_flat(replay_path, replay_flat(state.learner.replay));
  } else {
    fs::remove(replay_path, ec);
  }
  if (state.learner.ewc) {
    write_flat(ewc_path, ewc_flat(*state.learner.ewc));
  } else {
    fs::remove(ewc_path, ec);
  }
  write_text(dir / "registry.json", registry_json(state.registry).dump(2) + "\n");
  write_text(dir / "logs.json", logs_to_json(state.session_logs));
  // Written last so a partial save never looks complete.
  write_text(dir / "state.json", meta.dump(2) + "\n");
}

PipelineState load_state(const fs::path& dir) {
  const auto meta_path = dir / "state.json";
  require(fs::exists(meta_path), ErrorKind::Version, "no state.json in " + dir.string());
  const json meta = read_json(meta_path);
  require(meta.is_object() && meta.contains("version") && meta["version"].is_string(), ErrorKind::Version,
          meta_path.string() + " carries no version");
  const auto version = meta["version"].get<std::string>();
  require(version == kStateVersion, ErrorKind::Version,
          meta_path.string() + " has version '" + version + "', expected '" + kStateVersion + "'");

  PipelineState state;
  try {
    state.rng_seed = meta.at("rng_seed").get<std::uint64_t>();
    state.registry = registry_from(read_json(dir / "registry.json"));
    state.learner.classifier = classifier_from(read_flat(dir / "classifier.npy"));
    auto scorer_reader = read_flat(dir / "scorer.npy");
    state.scorer = scorer_from(meta.at("scorer"), scorer_reader);
    if (meta.at("replay").get<bool>()) state.learner.replay = replay_from(read_flat(dir / "replay.npy"));
    if (meta.at("ewc").get<bool>()) state.learner.ewc = ewc_from(read_flat(dir / "ewc.npy"));
    std::ifstream logs_in(dir / "logs.json", std::ios::binary);
    require(static_cast<bool>(logs_in), ErrorKind::Io, "cannot read " + (dir / "logs.json").string());
    std::stringstream buffer;
    buffer << logs_in.rdbuf();
    state.session_logs = logs_from_json(buffer.str());
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, dir.string() + ": " + e.what());
  }
  state.validate();
  return state;
}

} // namespace owlkit
