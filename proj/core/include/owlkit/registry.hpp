#pragma once

#include <optional>
#include <vector>

#include "owlkit/types.hpp"

namespace owlkit {

struct ClassEntry {
  Label class_id = 0;
  int origin_session = 0;
  bool discovered = false;
  Vector prototype;
  std::int64_t count = 0;
  /// Ground-truth label the class was matched to, or -1 when unknown. Base
  /// classes carry their own id. Used only for evaluation.
  Label true_label = kUnlabeled;

  bool operator==(const ClassEntry& other) const;
};

/// Known classes, in registration order. Ids are dense in [0, C).
class ClassRegistry {
public:
  const std::vector<ClassEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const ClassEntry& at(Label class_id) const;

  /// Appends a class with the next free id and returns that id.
  Label add(int origin_session, bool discovered, const Vector& prototype, std::int64_t count,
            Label true_label = kUnlabeled);

  void set_prototype(Label class_id, const Vector& prototype);
  void set_true_label(Label class_id, Label true_label);

  /// Class id whose true_label matches, if any.
  std::optional<Label> find_by_true_label(Label true_label) const;

  void validate() const;

  bool operator==(const ClassRegistry&) const = default;

private:
  std::vector<ClassEntry> entries_;
};

} // namespace owlkit
