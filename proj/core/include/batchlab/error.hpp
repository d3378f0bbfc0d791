#pragma once

#include <stdexcept>
#include <string>

namespace batchlab {

// One exception type per failure family so callers can react to the
// category instead of parsing message text.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };    // shape mismatch
struct ParameterError : Error { using Error::Error; };    // bad argument value
struct FormatError : Error { using Error::Error; };       // malformed input file
struct IoError : Error { using Error::Error; };           // filesystem failure
struct ConsistencyError : Error { using Error::Error; };  // companion data disagrees
struct StateError : Error { using Error::Error; };        // call in wrong state
struct NumericError : Error { using Error::Error; };      // non-finite value
struct ConfigError : Error { using Error::Error; };       // config parse/validation
struct SizeError : Error { using Error::Error; };         // combinatorial guard tripped
struct FitError : Error { using Error::Error; };          // degenerate regression
struct InfeasibleError : Error { using Error::Error; };   // no solution exists

}  // namespace batchlab
