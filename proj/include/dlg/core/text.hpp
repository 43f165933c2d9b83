#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dlg {

// Lowercase whitespace tokenization; leading and trailing `.,!?` are
// stripped from each token and tokens left empty are dropped.
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace dlg
