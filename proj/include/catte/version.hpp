#pragma once

#include <string_view>

namespace catte {

/// git-describe-style version baked in at configure time.
std::string_view version();

}  // namespace catte
