#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace motive {

/// Lowercased alphanumeric runs; everything else separates tokens.
std::vector<std::string> text_tokens(std::string_view text);

}  // namespace motive
