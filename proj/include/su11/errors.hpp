#pragma once

#include <stdexcept>
#include <string>

namespace su11 {

// Violation of a documented precondition, postcondition, or type invariant.
struct contract_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File or serialization failure; message carries the offending path.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace su11
