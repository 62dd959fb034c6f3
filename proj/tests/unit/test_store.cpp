#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "oracles.hpp"
#include "owlkit/error.hpp"
#include "owlkit/manifest.hpp"
#include "owlkit/npy.hpp"
#include "owlkit/owl.hpp"
#include "owlkit/registry.hpp"
#include "owlkit/state.hpp"
#include "owlkit/synth.hpp"
#include "support.hpp"

namespace owlkit {
namespace {

using test::random_f32_matrix;
using test::scratch_dir;
namespace fs = std::filesystem;

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<std::byte>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---- npy ------------------------------------------------------------------

TEST(Npy, HeaderIsAlignedAndReadableByOracle) {
  const auto dir = scratch_dir();
  const std::vector<float> data{1, 2, 3, 4, 5, 6};
  npy::write(dir / "a.npy", npy::Array::from<float>(data, {2, 3}));
  const auto f = oracle::read_npy((dir / "a.npy").string());
  EXPECT_EQ(f.descr, "<f4");
  EXPECT_FALSE(f.fortran);
  EXPECT_EQ(f.shape, (std::vector<std::uint64_t>{2, 3}));
  EXPECT_EQ(oracle::npy_values<float>(f), data);
}

TEST(Npy, LabelsAreLittleEndianInt64) {
  const auto dir = scratch_dir();
  const std::vector<std::int64_t> labels{0, 1, -1, 1LL << 40};
  npy::write(dir / "y.npy", npy::Array::from<std::int64_t>(labels, {4}));
  const auto f = oracle::read_npy((dir / "y.npy").string());
  EXPECT_EQ(f.descr, "<i8");
  EXPECT_EQ(f.shape, (std::vector<std::uint64_t>{4}));
  EXPECT_EQ(oracle::npy_values<std::int64_t>(f), labels);
}

TEST(Npy, RejectsBadMagicAndVersion) {
  auto bytes = npy::encode(npy::Array::from<float>(std::vector<float>{1.0f}, {1, 1}));
  auto bad_magic = bytes;
  bad_magic[1] = std::byte{'X'};
  EXPECT_OWL_ERROR(npy::decode(bad_magic), ErrorKind::Format);
  auto bad_version = bytes;
  bad_version[6] = std::byte{2};
  EXPECT_OWL_ERROR(npy::decode(bad_version), ErrorKind::Format);
  EXPECT_OWL_ERROR(npy::decode(std::span<const std::byte>(bytes.data(), 5)), ErrorKind::Format);
}

TEST(Npy, RejectsFortranOrderAndUnknownDtype) {
  auto text = npy::header_text(npy::Array::from<float>(std::vector<float>{1.0f}, {1, 1}));
  for (const auto& [from, to] : std::vector<std::pair<std::string, std::string>>{
           {"'fortran_order': False", "'fortran_order': True "}, {"'<f4'", "'>f4'"}}) {
    auto bytes = npy::encode(npy::Array::from<float>(std::vector<float>{1.0f}, {1, 1}));
    std::string header(reinterpret_cast<const char*>(bytes.data()) + 10, text.size());
    const auto pos = header.find(from);
    ASSERT_NE(pos, std::string::npos) << header;
    header.replace(pos, from.size(), to);
    std::memcpy(bytes.data() + 10, header.data(), header.size());
    EXPECT_OWL_ERROR(npy::decode(bytes), ErrorKind::Format);
  }
}

// Property: any declared shape whose product disagrees with the payload is rejected.
TEST(Npy, RejectsEveryShapePayloadMismatch) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto rows = 1 + gen() % 6, cols = 1 + gen() % 6;
    std::vector<float> data(rows * cols, 0.5f);
    auto bytes = npy::encode(npy::Array::from<float>(data, {rows, cols}));
    const int mode = static_cast<int>(gen() % 3);
    if (mode == 0) bytes.pop_back();                      // short payload
    if (mode == 1) bytes.insert(bytes.end(), 4, std::byte{0});  // extra element
    if (mode == 2) bytes.insert(bytes.end(), 1, std::byte{0});  // ragged
    EXPECT_OWL_ERROR(npy::decode(bytes), ErrorKind::Format);
  }
}

TEST(Npy, Float64RoundTripIsBitExact) {
  std::mt19937_64 gen(3);
  const Matrix m = test::random_matrix(gen, 7, 5);
  std::vector<double> flat(m.data(), m.data() + m.size());
  const auto back = npy::decode(npy::encode(npy::Array::from<double>(flat, {7, 5}))).values<double>();
  ASSERT_EQ(back.size(), flat.size());
  EXPECT_EQ(std::memcmp(back.data(), flat.data(), flat.size() * sizeof(double)), 0);
}

// ---- embeddings -----------------------------------------------------------

TEST(Embeddings, ReadsSmallMatrixWithoutLabels) {
  const auto dir = scratch_dir();
  npy::write(dir / "x.npy", npy::Array::from<float>(std::vector<float>{1, 2, 3, 4, 5, 6}, {2, 3}));
  const auto set = load_embeddings(dir / "x.npy");
  EXPECT_EQ(set.size(), 2u);
  EXPECT_EQ(set.dim(), 3u);
  EXPECT_FALSE(set.labeled());
  EXPECT_EQ(set.features(1, 2), 6.0f);
  EXPECT_EQ(set.ids, (IdVector{0, 1}));
}

TEST(Embeddings, LabelLengthMismatchIsConsistencyError) {
  const auto dir = scratch_dir();
  npy::write(dir / "x.npy", npy::Array::from<float>(std::vector<float>(5, 1.0f), {5, 1}));
  npy::write(dir / "y.npy", npy::Array::from<std::int64_t>(std::vector<std::int64_t>{0, 1, 2, 3}, {4}));
  EXPECT_OWL_ERROR(load_embeddings(dir / "x.npy", dir / "y.npy"), ErrorKind::Consistency);
}

TEST(Embeddings, NonFiniteValuesAreDataErrors) {
  const auto dir = scratch_dir();
  for (const float bad : {std::numeric_limits<float>::quiet_NaN(), std::numeric_limits<float>::infinity()}) {
    npy::write(dir / "x.npy", npy::Array::from<float>(std::vector<float>{1.0f, bad}, {1, 2}));
    EXPECT_OWL_ERROR(load_embeddings(dir / "x.npy"), ErrorKind::Data);
  }
}

TEST(Embeddings, MissingFileIsIoError) {
  EXPECT_OWL_ERROR(load_embeddings(scratch_dir() / "absent.npy"), ErrorKind::Io);
}

TEST(Embeddings, UnwritablePathIsIoError) {
  const auto set = EmbeddingSet::from_matrix(Matrix::Ones(1, 1));
  EXPECT_OWL_ERROR(save_embeddings(set, scratch_dir() / "no" / "such" / "dir" / "x.npy"), ErrorKind::Io);
}

TEST(Embeddings, OneByOneRoundTrip) {
  const auto dir = scratch_dir();
  save_embeddings(EmbeddingSet::from_matrix(Matrix::Constant(1, 1, 7.5)), dir / "x.npy");
  EXPECT_EQ(load_embeddings(dir / "x.npy").features(0, 0), 7.5f);
}

TEST(Embeddings, LabelsRoundTrip) {
  const auto dir = scratch_dir();
  save_embeddings(EmbeddingSet::from_matrix(Matrix::Zero(3, 2), LabelVector{0, 1, 2}), dir / "x.npy", dir / "y.npy");
  EXPECT_EQ(*load_embeddings(dir / "x.npy", dir / "y.npy").labels, (LabelVector{0, 1, 2}));
}

// Round trip of random matrices is bit-exact, checked byte-for-byte against the
// independent reader.
TEST(Embeddings, RandomRoundTripMatchesOracleBytes) {
  std::mt19937_64 gen(5);
  for (const auto& [n, d] : std::vector<std::pair<int, int>>{{100, 16}, {1000, 64}}) {
    const auto dir = scratch_dir(std::to_string(n));
    const auto set = EmbeddingSet::from_matrix(random_f32_matrix(gen, n, d));
    save_embeddings(set, dir / "x.npy");
    const auto f = oracle::read_npy((dir / "x.npy").string());
    ASSERT_EQ(f.shape, (std::vector<std::uint64_t>{static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(d)}));
    ASSERT_EQ(f.payload.size(), set.size() * set.dim() * sizeof(float));
    EXPECT_EQ(std::memcmp(f.payload.data(), set.features.data(), f.payload.size()), 0);
    const auto back = load_embeddings(dir / "x.npy");
    EXPECT_EQ(std::memcmp(back.features.data(), set.features.data(), f.payload.size()), 0);
  }
}

TEST(Embeddings, DuplicateIdsAreRejected) {
  auto set = EmbeddingSet::from_matrix(Matrix::Zero(2, 1));
  set.ids = {3, 3};
  EXPECT_OWL_ERROR(set.validate(), ErrorKind::Data);
}

TEST(Embeddings, SubsetCarriesIdsAndLabels) {
  const auto set = EmbeddingSet::from_matrix(Matrix::Identity(3, 3), LabelVector{4, 5, 6});
  const IndexVector rows{2, 0};
  const auto sub = set.subset(rows);
  EXPECT_EQ(sub.ids, (IdVector{2, 0}));
  EXPECT_EQ(*sub.labels, (LabelVector{6, 4}));
  EXPECT_EQ(sub.features(0, 2), 1.0f);
}

// ---- manifest -------------------------------------------------------------

TEST(Manifest, RoundTripAndRelativePaths) {
  const auto dir = scratch_dir();
  save_embeddings(EmbeddingSet::from_matrix(Matrix::Ones(2, 3), LabelVector{0, 1}), dir / "f.npy", dir / "l.npy");
  Manifest m;
  m.dataset = "toy";
  m.dim = 3;
  m.sessions = {{0, SessionRole::BaseTrain, "f.npy", "l.npy", true}, {0, SessionRole::BaseVal, "f.npy", "l.npy", true}};
  save_manifest(m, dir / "manifest.json");
  const auto back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(back.dataset, "toy");
  EXPECT_EQ(back.sessions, m.sessions);
  EXPECT_EQ(back.load(*back.find(SessionRole::BaseTrain, 0)).size(), 2u);
  EXPECT_EQ(back.find(SessionRole::SessionTrain, 1), nullptr);
  EXPECT_EQ(back.last_session(), 0);
}

TEST(Manifest, BaseEntriesMustBeLabeled) {
  const auto dir = scratch_dir();
  std::ofstream(dir / "manifest.json")
      << R"({"dataset":"x","dim":2,"sessions":[{"session_index":0,"role":"base-train","feature_path":"f.npy","label_path":null,"labeled":false}]})";
  EXPECT_OWL_ERROR(load_manifest(dir / "manifest.json"), ErrorKind::Format);
}

TEST(Manifest, MalformedJsonAndUnknownRole) {
  const auto dir = scratch_dir();
  std::ofstream(dir / "a.json") << "{not json";
  EXPECT_OWL_ERROR(load_manifest(dir / "a.json"), ErrorKind::Format);
  std::ofstream(dir / "b.json")
      << R"({"dataset":"x","dim":2,"sessions":[{"session_index":0,"role":"warmup","feature_path":"f.npy","label_path":null,"labeled":true}]})";
  EXPECT_OWL_ERROR(load_manifest(dir / "b.json"), ErrorKind::Format);
  EXPECT_OWL_ERROR(load_manifest(dir / "missing.json"), ErrorKind::Io);
}

TEST(Manifest, WidthMismatchWithFileIsShapeError) {
  const auto dir = scratch_dir();
  save_embeddings(EmbeddingSet::from_matrix(Matrix::Ones(2, 3), LabelVector{0, 1}), dir / "f.npy", dir / "l.npy");
  Manifest m;
  m.dataset = "toy";
  m.dim = 4;
  m.sessions = {{0, SessionRole::BaseTrain, "f.npy", "l.npy", true}};
  save_manifest(m, dir / "manifest.json");
  const auto back = load_manifest(dir / "manifest.json");
  EXPECT_OWL_ERROR(back.load(back.sessions[0]), ErrorKind::Shape);
}

// ---- registry -------------------------------------------------------------

TEST(Registry, IdsAreDenseAndOriginMonotone) {
  ClassRegistry r;
  EXPECT_EQ(r.add(0, false, Vector::Zero(2), 3, 0), 0);
  EXPECT_EQ(r.add(0, false, Vector::Zero(2), 3, 1), 1);
  EXPECT_EQ(r.add(1, true, Vector::Ones(2), 5), 2);
  EXPECT_NO_THROW(r.validate());
  EXPECT_EQ(r.find_by_true_label(1), std::optional<Label>(1));
  EXPECT_FALSE(r.find_by_true_label(9).has_value());
  EXPECT_OWL_ERROR(r.add(0, true, Vector::Ones(2), 1), ErrorKind::State);
  EXPECT_OWL_ERROR(r.add(2, true, Vector::Ones(2), 0), ErrorKind::Data);
  Vector bad = Vector::Ones(2);
  bad(0) = std::nan("");
  EXPECT_OWL_ERROR(r.add(2, true, bad, 1), ErrorKind::Data);
  EXPECT_OWL_ERROR(static_cast<void>(r.at(7)), ErrorKind::Argument);
}

// ---- state ----------------------------------------------------------------

synth::ScenarioSpec small_spec() {
  synth::ScenarioSpec spec;
  spec.dim = 8;
  spec.base_classes = 3;
  spec.sessions = {{2, 0.5, 40}, {1, 0.5, 40}};
  spec.base_samples_per_class = 40;
  spec.test_samples_per_class = 30;
  spec.seed = 21;
  return spec;
}

OwlConfig quick_config(Strategy strategy) {
  OwlConfig cfg;
  cfg.cil.strategy = strategy;
  cfg.cil.epochs = 5;
  cfg.seed = 4;
  return cfg;
}

PipelineState two_session_state(Strategy strategy) {
  const auto scenario = synth::generate(small_spec());
  const auto cfg = quick_config(strategy);
  auto state = run_base(scenario.base_train, scenario.base_val, cfg);
  for (const auto& s : scenario.sessions) state = run_open_session(state, s.train, s.test, cfg).first;
  return state;
}

TEST(State, BaseRoundTripKeepsRegistry) {
  const auto scenario = synth::generate(small_spec());
  const auto state = run_base(scenario.base_train, scenario.base_val, quick_config(Strategy::Icarl));
  const auto dir = scratch_dir();
  save_state(state, dir);
  const auto back = load_state(dir);
  EXPECT_EQ(back.registry.size(), 3u);
  EXPECT_EQ(back, state);
}

// Field-by-field comparison after two sessions, for each strategy's memory.
TEST(State, TwoSessionRoundTripIsExact) {
  for (const auto strategy : {Strategy::Icarl, Strategy::Ewc, Strategy::Lwf}) {
    const auto state = two_session_state(strategy);
    ASSERT_EQ(state.session_logs.size(), 3u);
    const auto dir = scratch_dir(std::string(to_string(strategy)));
    save_state(state, dir);
    const auto back = load_state(dir);
    ASSERT_EQ(back.session_logs.size(), state.session_logs.size());
    for (std::size_t i = 0; i < state.session_logs.size(); ++i) EXPECT_EQ(back.session_logs[i], state.session_logs[i]);
    EXPECT_EQ(back.registry, state.registry);
    EXPECT_EQ(back.learner, state.learner);
    EXPECT_EQ(back.scorer, state.scorer);
    EXPECT_EQ(back.rng_seed, state.rng_seed);

    const auto again = dir.string() + "_again";
    save_state(back, again);
    for (const char* file : {"state.json", "classifier.npy", "scorer.npy", "registry.json", "logs.json"})
      EXPECT_EQ(file_bytes(dir / file), file_bytes(fs::path(again) / file)) << file;
  }
}

TEST(State, EmptyDirectoryIsVersionError) { EXPECT_OWL_ERROR(load_state(scratch_dir()), ErrorKind::Version); }

TEST(State, ForeignVersionIsVersionError) {
  const auto scenario = synth::generate(small_spec());
  const auto dir = scratch_dir();
  save_state(run_base(scenario.base_train, scenario.base_val, quick_config(Strategy::Finetune)), dir);
  std::ifstream in(dir / "state.json");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.find("owl-state-v1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 12, "owl-state-v9");
  std::ofstream(dir / "state.json") << text;
  EXPECT_OWL_ERROR(load_state(dir), ErrorKind::Version);
}

TEST(State, TruncatedTensorFileIsFormatError) {
  const auto scenario = synth::generate(small_spec());
  const auto dir = scratch_dir();
  save_state(run_base(scenario.base_train, scenario.base_val, quick_config(Strategy::Finetune)), dir);
  auto bytes = npy::encode(npy::read(dir / "classifier.npy"));
  bytes.resize(bytes.size() - 8);
  write_bytes(dir / "classifier.npy", bytes);
  EXPECT_OWL_ERROR(load_state(dir), ErrorKind::Format);
}

TEST(State, LogsJsonRoundTrip) {
  SessionLog a;
  a.session_index = 0;
  a.class_count = 3;
  a.session_acc = 0.1 + 0.2;
  a.avg = a.session_acc;
  SessionLog b = a;
  b.session_index = 1;
  b.id_acc = 1.0 / 3.0;
  b.nmi = 0.75;
  b.new_class_ids = {3, 4};
  const std::vector<SessionLog> logs{a, b};
  EXPECT_EQ(logs_from_json(logs_to_json(logs)), logs);
}

TEST(State, GappedLogsFailValidation) {
  const auto scenario = synth::generate(small_spec());
  auto state = run_base(scenario.base_train, scenario.base_val, quick_config(Strategy::Finetune));
  SessionLog gap;
  gap.session_index = 5;
  state.session_logs.push_back(gap);
  EXPECT_OWL_ERROR(state.validate(), ErrorKind::Consistency);
}

} // namespace
} // namespace owlkit
