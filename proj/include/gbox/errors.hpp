#pragma once

#include <stdexcept>
#include <string>

namespace gbox {

// Exit-code mapping used by the CLI:
//   ValidationError -> 2, DataError -> 3, DivergenceError -> 4.

/// Bad arguments, malformed configuration, or a structurally invalid taxonomy.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data is missing, corrupt, or inconsistent with the model.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gbox
