#pragma once

#include <stdexcept>
#include <string>

namespace framesel {

/// Raised for malformed inputs, violated preconditions and corrupt files.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace framesel
