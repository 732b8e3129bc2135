#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace sc {

// Shortest representation that round-trips the exact double. Locale-free.
inline std::string format_double(double x) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, p);
}

// Fixed 17 significant digits, enough to reproduce any double exactly.
inline std::string format_double17(double x) {
    char buf[48];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x,
                                 std::chars_format::general, 17);
    (void)ec;
    return std::string(buf, p);
}

} // namespace sc
