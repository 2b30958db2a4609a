#pragma once

#include <map>
#include <string>
#include <string_view>

namespace tripost::detail {

// Files under assets/, keyed by relative path ("lexicon.txt", "prompts/...").
const std::map<std::string, std::string_view>& asset_table();

std::string_view asset(std::string_view name);

}  // namespace tripost::detail
