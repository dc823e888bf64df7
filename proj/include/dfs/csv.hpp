#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <system_error>
#include <type_traits>

namespace dfs::csv {

/// Shortest-locale-free rendering with 17 significant digits.
inline std::string format_real(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, end);
}

inline std::string format_real(const std::optional<double>& value) {
    return value ? format_real(*value) : std::string{};
}

template <typename... Ts>
void write_row(std::ostream& out, const Ts&... fields) {
    bool first = true;
    auto emit = [&](const auto& f) {
        if (!first) out << ',';
        first = false;
        if constexpr (std::is_arithmetic_v<std::decay_t<decltype(f)>> &&
                      !std::is_integral_v<std::decay_t<decltype(f)>>) {
            out << format_real(static_cast<double>(f));
        } else if constexpr (std::is_same_v<std::decay_t<decltype(f)>, std::optional<double>>) {
            out << format_real(f);
        } else {
            out << f;
        }
    };
    (emit(fields), ...);
    out << '\n';
}

}  // namespace dfs::csv
