#pragma once

#include <stdexcept>
#include <string>

namespace netssa {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text (flow records, CSV files, config lines).
struct ParseError : Error {
    using Error::Error;
};

// Argument outside its documented domain.
struct ParameterError : Error {
    using Error::Error;
};

// Matrix/vector dimensions that do not fit together.
struct ShapeError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Result, truth and series files that do not share a time base.
struct AlignmentError : Error {
    using Error::Error;
};

struct RankError : Error {
    using Error::Error;
};

}  // namespace netssa
