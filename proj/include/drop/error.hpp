#pragma once

#include <stdexcept>

namespace drop {

/// File-system or stream failure; the message carries the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values reached a learning update.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace drop
