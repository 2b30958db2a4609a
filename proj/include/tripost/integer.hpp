#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace tripost {

// Depth-3 products of six single-digit operands reach ~8e22, past int64.
__extension__ using Integer = __int128;

std::string to_string(Integer v);
std::optional<Integer> parse_integer(std::string_view text);

}  // namespace tripost
