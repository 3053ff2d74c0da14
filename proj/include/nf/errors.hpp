#pragma once

#include <stdexcept>
#include <string>

namespace nf {

// Base class for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input that could not be parsed at all (bad JSON, bad number).
struct parse_error : error {
    using error::error;
};

// Input parsed but violates a contract (duplicate id, unknown label, ...).
struct validation_error : error {
    using error::error;
};

// Binary or text file does not match its declared on-disk format.
struct format_error : error {
    using error::error;
};

// A caller passed an out-of-range or inconsistent argument.
struct argument_error : error {
    using error::error;
};

// Training aborted (non-finite loss or gradient).
struct training_error : error {
    using error::error;
};

}  // namespace nf
