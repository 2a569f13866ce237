#ifndef PSLIB_FORMAT_HPP
#define PSLIB_FORMAT_HPP

#include <charconv>
#include <cmath>
#include <string>

namespace pslib {

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace pslib

#endif
