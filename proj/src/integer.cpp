#include "tripost/integer.hpp"

#include <algorithm>

namespace tripost {

std::string to_string(Integer v) {
    if (v == 0) return "0";
    const bool negative = v < 0;
    // Work on the negative side so the minimum value does not overflow.
    Integer n = negative ? v : -v;
    std::string digits;
    while (n != 0) {
        const int d = static_cast<int>(-(n % 10));
        digits.push_back(static_cast<char>('0' + d));
        n /= 10;
    }
    if (negative) digits.push_back('-');
    std::reverse(digits.begin(), digits.end());
    return digits;
}

std::optional<Integer> parse_integer(std::string_view text) {
    if (text.empty()) return std::nullopt;
    std::size_t i = 0;
    bool negative = false;
    if (text[0] == '-') {
        negative = true;
        i = 1;
    }
    if (i == text.size() || text.size() - i > 36) return std::nullopt;
    Integer n = 0;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (c < '0' || c > '9') return std::nullopt;
        n = n * 10 + (c - '0');
    }
    return negative ? -n : n;
}

}  // namespace tripost
