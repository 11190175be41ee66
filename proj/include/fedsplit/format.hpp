#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace fedsplit
{

/// Shortest "%.17g" rendering; round-trips every finite double.
inline std::string format_double(double value)
{
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

} // namespace fedsplit
