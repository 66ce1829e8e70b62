#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "gmenet/types.hpp"

namespace gmenet {

// One learnable tensor plus its gradient accumulator. Frozen parameters keep
// receiving gradient flow but are skipped by optimizer updates.
struct Param {
  MatX value;
  MatX grad;
  bool frozen = false;

  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
};

// Named parameter tensors, ordered by name so that every iteration over the
// store is deterministic. Node addresses are stable: modules keep Param*
// into the store for the lifetime of the model.
class ParamStore {
 public:
  Param& create(const std::string& name, Index rows, Index cols);

  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  void zero_grads();

  // Group = name prefix, e.g. freeze_group("cggm.") freezes both directions.
  void freeze_group(const std::string& prefix);
  void unfreeze_group(const std::string& prefix);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count(bool include_frozen = true) const;
  std::vector<std::string> names() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, Param> entries_;
};

}  // namespace gmenet
