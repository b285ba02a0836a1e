#pragma once

#include <stdexcept>
#include <string>

namespace coalflow {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// map_core
struct NonMonotoneInput : Error { using Error::Error; };
struct WindowMismatch : Error { using Error::Error; };
struct OutOfWindow : Error { using Error::Error; };
struct RangeEscapesWindow : Error { using Error::Error; };
struct NonPositiveScale : Error { using Error::Error; };

// map_models / crw
struct WindowTooSmall : Error { using Error::Error; };
struct AssumptionViolated : Error { using Error::Error; };

// cbm
struct UnorderedStarts : Error { using Error::Error; };
struct NonPositiveDt : Error { using Error::Error; };

// renorm
struct OddEnsemble : Error { using Error::Error; };
struct WindowExhausted : Error { using Error::Error; };

// metrics / checks
struct EmptySample : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct BadParams : Error { using Error::Error; };

// cli
struct ConfigError : Error { using Error::Error; };

}  // namespace coalflow
