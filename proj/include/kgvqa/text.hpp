#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgvqa {

/// Lowercases and splits on every non-alphanumeric character.
std::vector<std::string> tokenize(std::string_view text);

std::string join(std::span<const std::string> tokens, std::string_view sep = " ");

}  // namespace kgvqa
