#pragma once

#include <stdexcept>
#include <string>

namespace opfdl {

// Case file could not be parsed (missing block, malformed row, unsupported
// cost model). CLI maps this to exit code 2.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parsed case is numerically or structurally invalid (zero-impedance branch,
// dangling bus reference, no reference bus, ...).
struct CaseError : std::runtime_error {
  explicit CaseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tape operation applied outside its domain (log/sqrt of a negative value,
// division by zero). Carries the offending node id.
struct DomainError : std::runtime_error {
  int node_id;
  DomainError(int node, const std::string& msg)
      : std::runtime_error(msg), node_id(node) {}
};

// Tape operands have incompatible shapes.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset generation could not collect n feasible samples within the 3n
// resample budget. Exit code 3.
struct ResampleCapExceeded : std::runtime_error {
  explicit ResampleCapExceeded(const std::string& msg)
      : std::runtime_error(msg) {}
};

// Training loss or gradient became non-finite. Exit code 4.
struct NonFiniteLoss : std::runtime_error {
  explicit NonFiniteLoss(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint/dataset/case disagree (bus count, case name, missing labels).
// Exit code 5.
struct MismatchError : std::runtime_error {
  explicit MismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

// Serialized artifact has the wrong schema or version. Exit code 6 for
// report inputs; dataset loading raises it as a hard error.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace opfdl
