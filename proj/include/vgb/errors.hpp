#pragma once

#include <stdexcept>
#include <string>

namespace vgb {

/// Precondition broken by the caller (bad depth, negative mass, ...).
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Exact enumeration would exceed the configured node/leaf cap.
class EnumerationCapExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Tilt or target has no mass anywhere.
class DegenerateTarget : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Autoregressive sampler hit a prefix whose children all have weight zero.
class SamplerStuck : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Walk reached a node with no positively weighted neighbour.
class IsolatedNode : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace vgb
