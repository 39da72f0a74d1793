#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace semtok::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Exit codes: 0 success, 1 usage error, 2 data or validation error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semtok::cli
