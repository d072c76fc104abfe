#pragma once

#include <iosfwd>

namespace cot3d::cli {

// Exit codes: 0 success, 1 data/validation error, 2 usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cot3d::cli
