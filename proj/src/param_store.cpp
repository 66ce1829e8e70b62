#include "gmenet/param_store.hpp"

#include "gmenet/check.hpp"

namespace gmenet {

Param& ParamStore::create(const std::string& name, Index rows, Index cols) {
  require(rows > 0 && cols > 0, "param '" + name + "': non-positive shape");
  require(!has(name), "param '" + name + "' already exists");
  Param& p = entries_[name];
  p.value = MatX::Zero(rows, cols);
  p.grad = MatX::Zero(rows, cols);
  return p;
}

Param& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  require(it != entries_.end(), "unknown param '" + name + "'");
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  require(it != entries_.end(), "unknown param '" + name + "'");
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : entries_) p.grad.setZero();
}

void ParamStore::freeze_group(const std::string& prefix) {
  for (auto& [name, p] : entries_)
    if (name.rfind(prefix, 0) == 0) p.frozen = true;
}

void ParamStore::unfreeze_group(const std::string& prefix) {
  for (auto& [name, p] : entries_)
    if (name.rfind(prefix, 0) == 0) p.frozen = false;
}

std::size_t ParamStore::scalar_count(bool include_frozen) const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_) {
    if (!include_frozen && p.frozen) continue;
    n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, p] : entries_) out.push_back(name);
  return out;
}

}  // namespace gmenet
