#include "owlkit/registry.hpp"

#include <string>

#include "owlkit/error.hpp"

namespace owlkit {

bool ClassEntry::operator==(const ClassEntry& other) const {
  return class_id == other.class_id && origin_session == other.origin_session &&
         discovered == other.discovered && count == other.count && true_label == other.true_label &&
         prototype.size() == other.prototype.size() && prototype == other.prototype;
}

const ClassEntry& ClassRegistry::at(Label class_id) const {
  require(class_id >= 0 && static_cast<std::size_t>(class_id) < entries_.size(), ErrorKind::Argument,
          "unknown class id " + std::to_string(class_id));
  return entries_[static_cast<std::size_t>(class_id)];
}

Label ClassRegistry::add(int origin_session, bool discovered, const Vector& prototype,
                         std::int64_t count, Label true_label) {
  require(count >= 1, ErrorKind::Data, "registered classes need at least one sample");
  require(prototype.allFinite(), ErrorKind::Data, "class prototype must be finite");
  if (!entries_.empty()) {
    require(origin_session >= entries_.back().origin_session, ErrorKind::State,
            "classes must be registered in session order");
    require(prototype.size() == entries_.front().prototype.size(), ErrorKind::Shape,
            "prototype width differs from registered classes");
  }
  const auto id = static_cast<Label>(entries_.size());
  entries_.push_back({id, origin_session, discovered, prototype, count, true_label});
  return id;
}

void ClassRegistry::set_prototype(Label class_id, const Vector& prototype) {
  at(class_id);
  require(prototype.allFinite(), ErrorKind::Data, "class prototype must be finite");
  entries_[static_cast<std::size_t>(class_id)].prototype = prototype;
}

void ClassRegistry::set_true_label(Label class_id, Label true_label) {
  at(class_id);
  entries_[static_cast<std::size_t>(class_id)].true_label = true_label;
}

std::optional<Label> ClassRegistry::find_by_true_label(Label true_label) const {
  if (true_label < 0) return std::nullopt;
  for (const auto& e : entries_) {
    if (e.true_label == true_label) return e.class_id;
  }
  return std::nullopt;
}

void ClassRegistry::validate() const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    require(e.class_id == static_cast<Label>(i), ErrorKind::Data, "class ids must be dense");
    require(e.count >= 1, ErrorKind::Data, "class count must be >= 1");
    require(e.prototype.allFinite(), ErrorKind::Data, "class prototype must be finite");
    if (i > 0) {
      require(e.origin_session >= entries_[i - 1].origin_session, ErrorKind::Data,
              "origin_session must be non-decreasing");
    }
  }
}

} // namespace owlkit
