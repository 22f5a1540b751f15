#pragma once

#include <stdexcept>
#include <string>

namespace bevdg {

// Bad caller input: dimension mismatches, out-of-range parameters, malformed
// configs. Maps to BEVDG_STATUS_INVALID_ARGUMENT at the C boundary.
class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& msg) : std::invalid_argument(msg) {}
};

// Filesystem-level failure: missing file, unwritable path, short write.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parse failure of a file or message whose bytes were readable but do not
// follow the documented layout (PPM header, bank header, stats message, ...).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bevdg
