#pragma once

#include <charconv>
#include <string>

namespace cafforge {

/// Shortest decimal text that parses back to the identical double.
inline std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

}  // namespace cafforge
