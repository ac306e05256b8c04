#pragma once

#include <stdexcept>
#include <string>

namespace gvwo {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Operation not allowed in the current filter state (e.g. empty clone window).
struct InvalidState : std::logic_error {
  using std::logic_error::logic_error;
};

/// Triangulation or alignment without enough geometric constraint.
struct DegenerateGeometry : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BehindCamera : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Analytic and numeric derivatives disagree; `what()` names the block.
struct InternalConsistency : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The encoder stream, which carries dead reckoning, has a hole.
struct StreamGap : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gvwo
