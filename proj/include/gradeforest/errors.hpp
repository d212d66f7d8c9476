#pragma once

#include <stdexcept>
#include <string>

namespace gradeforest {

// Error categories. The CLI maps each one to a fixed process exit code.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing or malformed columns in an input file.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training data that cannot support the requested model (e.g. one class).
struct DegenerateDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model kind does not fit the task (binary logit on a k > 2 problem).
struct TaskMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A precondition on the caller's side was violated.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace gradeforest
