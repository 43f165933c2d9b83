#include "dlg/core/text.hpp"

#include <cctype>

namespace dlg {

namespace {
bool is_edge_punct(char c) { return c == '.' || c == ',' || c == '!' || c == '?'; }
}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view tok = text.substr(i, j - i);
    while (!tok.empty() && is_edge_punct(tok.front())) tok.remove_prefix(1);
    while (!tok.empty() && is_edge_punct(tok.back())) tok.remove_suffix(1);
    if (!tok.empty()) {
      std::string t(tok);
      for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      tokens.push_back(std::move(t));
    }
    i = j;
  }
  return tokens;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace dlg
