#pragma once

#include <stdexcept>
#include <string>

namespace gmenet {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

inline void require_io(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

}  // namespace gmenet
