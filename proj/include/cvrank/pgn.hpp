#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cvrank {

/// Tag section of one PGN game. Movetext is skipped.
struct PgnGame {
  std::size_t index = 0;  // position within the parsed text, from 0
  std::vector<std::pair<std::string, std::string>> tags;

  std::optional<std::string> tag(std::string_view name) const;
};

/// Splits PGN text into games. A game ends where movetext is followed by a new
/// tag section, or where a tag name repeats inside one tag section. Brace
/// comments, ';' comments and '%' escape lines are ignored.
std::vector<PgnGame> parse_pgn(std::string_view text);

/// Renders a minimal game whose tag section carries the given pairs and whose
/// movetext is the unknown-result marker.
std::string render_pgn_game(const std::vector<std::pair<std::string, std::string>>& tags);

}  // namespace cvrank
