#include "cvrank/pgn.hpp"

#include <algorithm>

namespace cvrank {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

// Parses `[Name "value"]`; returns false if the line is not a tag pair.
bool parse_tag(std::string_view line, std::string& name, std::string& value) {
  if (line.size() < 2 || line.front() != '[' || line.back() != ']') return false;
  std::string_view body = trim(line.substr(1, line.size() - 2));
  std::size_t i = 0;
  while (i < body.size() && body[i] != ' ' && body[i] != '\t' && body[i] != '"') ++i;
  if (i == 0) return false;
  name.assign(body.substr(0, i));
  body = trim(body.substr(i));
  if (body.size() < 2 || body.front() != '"' || body.back() != '"') return false;
  value.clear();
  for (std::size_t k = 1; k + 1 < body.size(); ++k) {
    if (body[k] == '\\' && k + 2 < body.size()) {
      value.push_back(body[++k]);
    } else {
      value.push_back(body[k]);
    }
  }
  return true;
}

}  // namespace

std::optional<std::string> PgnGame::tag(std::string_view name) const {
  for (const auto& [k, v] : tags) {
    if (k == name) return v;
  }
  return std::nullopt;
}

std::vector<PgnGame> parse_pgn(std::string_view text) {
  std::vector<PgnGame> games;
  PgnGame current;
  bool open = false;        // current holds at least one tag
  bool in_movetext = false;  // movetext seen since the tag section
  int brace_depth = 0;

  auto flush = [&] {
    if (open) {
      current.index = games.size();
      games.push_back(std::move(current));
    }
    current = PgnGame{};
    open = false;
    in_movetext = false;
  };

  std::size_t pos = 0;
  std::string name;
  std::string value;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (raw.starts_with('%')) continue;
    const std::string_view line = trim(raw);

    if (brace_depth == 0 && parse_tag(line, name, value)) {
      const bool repeated = std::any_of(current.tags.begin(), current.tags.end(),
                                        [&](const auto& kv) { return kv.first == name; });
      if (in_movetext || repeated) flush();
      current.tags.emplace_back(name, value);
      open = true;
      continue;
    }
    if (line.empty()) continue;

    // Movetext: only brace nesting matters.
    for (char c : line) {
      if (brace_depth == 0 && c == ';') break;
      if (c == '{') ++brace_depth;
      if (c == '}' && brace_depth > 0) --brace_depth;
    }
    if (open) in_movetext = true;
  }
  flush();
  return games;
}

std::string render_pgn_game(const std::vector<std::pair<std::string, std::string>>& tags) {
  std::string out;
  for (const auto& [k, v] : tags) {
    out += '[';
    out += k;
    out += " \"";
    for (char c : v) {
      if (c == '"' || c == '\\') out += '\\';
      if (c == '\n' || c == '\r') {
        out += ' ';
        continue;
      }
      out += c;
    }
    out += "\"]\n";
  }
  out += "\n*\n\n";
  return out;
}

}  // namespace cvrank
