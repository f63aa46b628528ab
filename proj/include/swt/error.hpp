#pragma once

#include <stdexcept>
#include <string>

namespace swt {

// Raised for malformed input data, violated preconditions and numerical
// failures. The CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Diagnostic {
  std::string sense_id;
  std::string message;
};

}  // namespace swt
