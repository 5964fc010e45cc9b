#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace occ {

// Class id 0 is always the empty class.
inline constexpr int kEmptyClass = 0;

enum class ClassKind { empty, stuff, thing };

struct ClassDef {
  std::string name;
  ClassKind kind = ClassKind::stuff;
};

// Ordered label vocabulary. Index in the table is the class id used in grids,
// predictions and ground truth.
class ClassTable {
 public:
  ClassTable() : ClassTable(default_definitions()) {}
  explicit ClassTable(std::vector<ClassDef> defs) : defs_(std::move(defs)) {
    if (defs_.empty() || defs_[kEmptyClass].kind != ClassKind::empty)
      throw std::invalid_argument("class table: class 0 must be the empty class");
    for (std::size_t i = 1; i < defs_.size(); ++i) {
      if (defs_[i].kind == ClassKind::empty)
        throw std::invalid_argument("class table: only class 0 may be empty");
      (defs_[i].kind == ClassKind::thing ? thing_ids_ : stuff_ids_)
          .push_back(static_cast<int>(i));
    }
    if (thing_ids_.empty() || stuff_ids_.empty())
      throw std::invalid_argument(
          "class table: need at least one thing and one stuff class");
  }

  int size() const { return static_cast<int>(defs_.size()); }
  const ClassDef& operator[](int id) const {
    return defs_.at(static_cast<std::size_t>(id));
  }
  bool valid_id(int id) const { return id >= 0 && id < size(); }
  bool is_thing(int id) const {
    return valid_id(id) && defs_[static_cast<std::size_t>(id)].kind == ClassKind::thing;
  }
  bool is_stuff(int id) const {
    return valid_id(id) && defs_[static_cast<std::size_t>(id)].kind == ClassKind::stuff;
  }
  const std::vector<int>& thing_ids() const { return thing_ids_; }
  const std::vector<int>& stuff_ids() const { return stuff_ids_; }

  static std::vector<ClassDef> default_definitions() {
    return {{"empty", ClassKind::empty},   {"road", ClassKind::stuff},
            {"terrain", ClassKind::stuff}, {"crate", ClassKind::thing},
            {"bracket", ClassKind::thing}, {"drum", ClassKind::thing}};
  }

 private:
  std::vector<ClassDef> defs_;
  std::vector<int> thing_ids_;
  std::vector<int> stuff_ids_;
};

}  // namespace occ
