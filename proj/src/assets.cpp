#include "assets.hpp"

#include "tripost/errors.hpp"

namespace tripost::detail {

std::string_view asset(std::string_view name) {
    const auto& table = asset_table();
    auto it = table.find(std::string(name));
    if (it == table.end()) throw IoError("missing embedded asset " + std::string(name));
    return it->second;
}

}  // namespace tripost::detail
