#include "gmenet/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gmenet/check.hpp"

namespace gmenet {
namespace {

std::string trim(const std::string& s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto b = std::find_if_not(s.begin(), s.end(), is_space);
  auto e = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
  return b < e ? std::string(b, e) : std::string{};
}

double parse_num(const std::string& text, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(what + ": not a number: '" + text + "'");
  }
  require(pos == text.size(), what + ": trailing junk in '" + text + "'");
  return v;
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  require_io(in.good(), "cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str(), path);
}

Config Config::from_string(const std::string& text,
                           const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = origin + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    require(eq != std::string::npos, where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), where + ": empty key");
    require(cfg.values_.emplace(key, value).second,
            where + ": duplicate key '" + key + "'");
  }
  return cfg;
}

std::string Config::raw(const std::string& key) const {
  used_.insert(key);
  return values_.at(key);
}

std::string Config::str(const std::string& key, const std::string& def) const {
  return has(key) ? raw(key) : def;
}

long long Config::integer(const std::string& key, long long def) const {
  if (!has(key)) return def;
  const std::string text = raw(key);
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(origin_ + ": " + key + ": not an integer: '" +
                                text + "'");
  }
  require(pos == text.size(),
          origin_ + ": " + key + ": trailing junk in '" + text + "'");
  return v;
}

std::uint64_t Config::uinteger(const std::string& key,
                               std::uint64_t def) const {
  if (!has(key)) return def;
  const std::string text = raw(key);
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(origin_ + ": " + key +
                                ": not an unsigned integer: '" + text + "'");
  }
  require(pos == text.size(),
          origin_ + ": " + key + ": trailing junk in '" + text + "'");
  return v;
}

double Config::num(const std::string& key, double def) const {
  if (!has(key)) return def;
  return parse_num(raw(key), origin_ + ": " + key);
}

bool Config::flag(const std::string& key, bool def) const {
  if (!has(key)) return def;
  std::string v = raw(key);
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw std::invalid_argument(origin_ + ": " + key + ": not a boolean: '" + v +
                              "'");
}

std::vector<double> Config::num_list(const std::string& key,
                                     const std::vector<double>& def) const {
  if (!has(key)) return def;
  const std::string text = raw(key);
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    require(!item.empty(), origin_ + ": " + key + ": empty list element");
    out.push_back(parse_num(item, origin_ + ": " + key));
  }
  return out;
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_)
    if (used_.count(key) == 0) out.push_back(key);
  return out;
}

void Config::require_all_used() const {
  const auto leftovers = unused_keys();
  if (leftovers.empty()) return;
  std::string msg = origin_ + ": unknown key(s):";
  for (const auto& k : leftovers) msg += " " + k;
  throw std::invalid_argument(msg);
}

}  // namespace gmenet
