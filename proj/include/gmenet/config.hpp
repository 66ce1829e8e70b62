#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace gmenet {

// Flat `key = value` text with '#' comments. Getters take a default, record
// which keys were read, and `require_all_used` turns leftovers (usually
// typos) into errors.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text,
                            const std::string& origin = "<config>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  bool empty() const { return values_.empty(); }

  std::string str(const std::string& key, const std::string& def) const;
  long long integer(const std::string& key, long long def) const;
  std::uint64_t uinteger(const std::string& key, std::uint64_t def) const;
  double num(const std::string& key, double def) const;
  bool flag(const std::string& key, bool def) const;
  // Comma-separated numbers; an empty value yields an empty list.
  std::vector<double> num_list(const std::string& key,
                               const std::vector<double>& def) const;

  std::vector<std::string> unused_keys() const;
  void require_all_used() const;

 private:
  std::string raw(const std::string& key) const;

  std::string origin_ = "<config>";
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace gmenet
