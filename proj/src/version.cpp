#include "catte/version.hpp"

#ifndef CATTE_VERSION
#define CATTE_VERSION "0.1.0-unknown"
#endif

namespace catte {

std::string_view version() { return CATTE_VERSION; }

}  // namespace catte
