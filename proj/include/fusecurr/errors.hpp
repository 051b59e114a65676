#pragma once

#include <stdexcept>
#include <string>

namespace fusecurr {

/// Base class for everything the engine throws. The CLI maps these to exit
/// code 2; what() always starts with the error kind so messages are greppable.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error("Error: " + msg) {}

protected:
    Error(const std::string& kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg) {}
};

#define FUSECURR_ERROR_KIND(Name)                                     \
    class Name : public Error {                                       \
    public:                                                           \
        explicit Name(const std::string& msg) : Error(#Name, msg) {}  \
    }

FUSECURR_ERROR_KIND(ParseError);      // malformed file contents
FUSECURR_ERROR_KIND(IoError);         // unreadable/unwritable paths
FUSECURR_ERROR_KIND(DimensionError);  // image size constraint violated
FUSECURR_ERROR_KIND(ShapeError);      // tensor shape mismatch
FUSECURR_ERROR_KIND(WeightError);     // loss weights off the simplex
FUSECURR_ERROR_KIND(StateError);      // bad agent state vector
FUSECURR_ERROR_KIND(TrajectoryError); // empty/invalid trajectory
FUSECURR_ERROR_KIND(DatasetError);    // dataset directory problems
FUSECURR_ERROR_KIND(NumericsError);   // NaN/Inf encountered during training
FUSECURR_ERROR_KIND(ConfigError);     // bad config file or option value

#undef FUSECURR_ERROR_KIND

} // namespace fusecurr
