#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#define TOML_HEADER_ONLY 1
#include <toml.hpp>

#include "owlkit/error.hpp"

namespace owlkit::cli {

namespace {

// Reads typed keys from one table and rejects any key nobody asked for.
class Section {
public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  template <typename T>
  void read(const char* key, T& out) {
    known_.insert(key);
    if (table_ == nullptr) return;
    const auto* node = table_->get(key);
    if (node == nullptr) return;
    out = convert<T>(*node, key);
  }

  template <typename T>
  void read(const char* key, std::optional<T>& out) {
    known_.insert(key);
    if (table_ == nullptr) return;
    const auto* node = table_->get(key);
    if (node == nullptr) return;
    out = convert<T>(*node, key);
  }

  void finish() const {
    if (table_ == nullptr) return;
    for (const auto& [key, node] : *table_) {
      require(known_.contains(std::string(key.str())), ErrorKind::Config,
              "unknown key '" + std::string(key.str()) + "' in [" + name_ + "]");
    }
  }

private:
  [[noreturn]] void type_error(const char* key, const char* expected) const {
    fail(ErrorKind::Config, "[" + name_ + "] " + key + " must be " + expected);
  }

  template <typename T>
  T convert(const toml::node& node, const char* key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!node.is_boolean()) type_error(key, "a boolean");
      return *node.value<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!node.is_integer()) type_error(key, "an integer");
      const auto v = *node.value<std::int64_t>();
      if constexpr (std::is_unsigned_v<T>) {
        if (v < 0) type_error(key, "non-negative");
      }
      return static_cast<T>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!node.is_number()) type_error(key, "a number");
      return *node.value<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!node.is_string()) type_error(key, "a string");
      return *node.value<std::string>();
    } else {
      const auto* arr = node.as_array();
      if (arr == nullptr) type_error(key, "an array of strings");
      T out;
      for (const auto& item : *arr) {
        if (!item.is_string()) type_error(key, "an array of strings");
        out.push_back(*item.value<std::string>());
      }
      return out;
    }
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> known_;
};

const toml::table* section(const toml::table& root, const char* name) {
  const auto* node = root.get(name);
  if (node == nullptr) return nullptr;
  require(node->is_table(), ErrorKind::Config, std::string("[") + name + "] must be a table");
  return node->as_table();
}

} // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  toml::table root;
  try {
    root = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << origin << ":" << e.source().begin.line << ": " << e.description();
    fail(ErrorKind::Config, msg.str());
  }
  for (const auto& [key, node] : root) {
    const std::string name(key.str());
    require(name == "scorer" || name == "cil" || name == "owl" || name == "report", ErrorKind::Config,
            "unknown section or key '" + name + "'");
  }

  RunConfig cfg;
  auto& owl = cfg.owl;

  Section scorer(section(root, "scorer"), "scorer");
  std::string method(to_string(owl.scorer.method));
  scorer.read("method", method);
  owl.scorer.method = parse_score_method(method);
  scorer.read("temperature", owl.scorer.temperature);
  scorer.read("vim_variance_target", owl.scorer.vim_variance_target);
  scorer.read("vim_dim_override", owl.scorer.vim_dim_override);
  scorer.read("knn_k", owl.scorer.knn_k);
  scorer.read("shrinkage_scale", owl.scorer.shrinkage_scale);
  scorer.finish();

  Section cil(section(root, "cil"), "cil");
  std::string strategy(to_string(owl.cil.strategy));
  std::string head(to_string(owl.cil.head_kind));
  cil.read("strategy", strategy);
  cil.read("head", head);
  owl.cil.strategy = parse_strategy(strategy);
  owl.cil.head_kind = parse_head_kind(head);
  cil.read("epochs", owl.cil.epochs);
  cil.read("lr", owl.cil.lr);
  cil.read("weight_decay", owl.cil.weight_decay);
  cil.read("batch_size", owl.cil.batch_size);
  cil.read("lambda_lwf", owl.cil.lambda_lwf);
  cil.read("kd_temperature", owl.cil.kd_temperature);
  cil.read("lambda_ewc", owl.cil.lambda_ewc);
  cil.read("replay_budget_m", owl.cil.replay_budget_m);
  cil.read("cosine_scale", owl.cil.cosine_scale);
  cil.finish();

  Section o(section(root, "owl"), "owl");
  o.read("target_tpr", owl.target_tpr);
  o.read("ncd_k", owl.ncd_k);
  o.read("include_pseudo_id", owl.include_pseudo_id);
  o.read("full_refit", owl.full_refit);
  o.read("drop_accepted_clusters", owl.drop_accepted_clusters);
  o.read("seed", owl.seed);
  o.finish();

  Section report(section(root, "report"), "report");
  report.read("near", cfg.report.near);
  report.read("far", cfg.report.far);
  report.read("tpr", cfg.report.tpr);
  report.finish();

  try {
    owl.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.detail());
  }
  require(cfg.report.tpr > 0.0 && cfg.report.tpr < 1.0, ErrorKind::Config, "[report] tpr must lie in (0, 1)");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Config, "cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

} // namespace owlkit::cli
