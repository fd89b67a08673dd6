// include/fpg/error.hpp
#pragma once

#include <stdexcept>
#include <string>

namespace fpg {

// Raised for every contract violation in the library: malformed input,
// shape mismatch, missing prerequisite artifacts.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fpg
