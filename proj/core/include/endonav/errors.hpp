#pragma once

#include <stdexcept>
#include <string>

namespace endonav {

// Malformed anatomy / config / replay documents.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Branch graph is not a connected tree rooted at the declared root.
class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Arguments outside an operation's documented domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Device insertion point outside the vessel lumen.
class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Environment used outside its reset/step lifecycle, or a task that cannot be
// resolved on a (possibly augmented) tree.
class LifecycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ResetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NormalizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor / parameter schema mismatch in the approximator toolkit.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Binary file with wrong magic, wrong version or truncated payload.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or planner score became NaN/inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Paired evaluation cells that do not line up across agents.
class PairingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace endonav
