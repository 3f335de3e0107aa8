#pragma once

#include <stdexcept>
#include <string>

namespace robustree {

// Invalid hyperparameters or command-line usage.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable, malformed or mismatched input data (CSV, tree files, matrices).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A tree document or node list that violates the genotype invariants.
// `path` points at the offending element, e.g. "nodes[3].L".
struct TreeFormatError : DataError {
  TreeFormatError(std::string where, const std::string& what)
      : DataError(where + ": " + what), path(std::move(where)) {}
  std::string path;
};

// Broken internal invariant; never a user error.
struct InternalFault : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace robustree
