#include "cvrank/fen.hpp"

#include <charconv>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "cvrank/error.hpp"

namespace cvrank {

namespace {

[[noreturn]] void malformed(std::string_view text, std::string_view why) {
  throw Error(Errc::MalformedFen, fmt::format("{} in \"{}\"", why, text));
}

std::vector<std::string_view> split_fields(std::string_view text) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i == text.size()) break;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t') ++j;
    fields.push_back(text.substr(i, j - i));
    i = j;
  }
  return fields;
}

bool piece_from_letter(char c, Square& sq) {
  const bool white = c >= 'A' && c <= 'Z';
  switch (white ? static_cast<char>(c - 'A' + 'a') : c) {
    case 'p': sq.kind = PieceKind::Pawn; break;
    case 'n': sq.kind = PieceKind::Knight; break;
    case 'b': sq.kind = PieceKind::Bishop; break;
    case 'r': sq.kind = PieceKind::Rook; break;
    case 'q': sq.kind = PieceKind::Queen; break;
    case 'k': sq.kind = PieceKind::King; break;
    default: return false;
  }
  sq.color = white ? Color::White : Color::Black;
  return true;
}

std::uint64_t parse_counter(std::string_view field, std::string_view text, std::string_view name) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) malformed(text, fmt::format("bad {}", name));
  return value;
}

std::string placement_of(const Board& board) {
  std::string out;
  for (int rank = 0; rank < 8; ++rank) {
    if (rank > 0) out.push_back('/');
    int run = 0;
    for (int file = 0; file < 8; ++file) {
      const Square& sq = board[rank * 8 + file];
      if (sq.empty()) {
        ++run;
        continue;
      }
      if (run > 0) out.push_back(static_cast<char>('0' + run));
      run = 0;
      out.push_back(sq.glyph());
    }
    if (run > 0) out.push_back(static_cast<char>('0' + run));
  }
  return out;
}

}  // namespace

char Square::glyph() const noexcept {
  char c = '.';
  switch (kind) {
    case PieceKind::None: return '.';
    case PieceKind::Pawn: c = 'p'; break;
    case PieceKind::Knight: c = 'n'; break;
    case PieceKind::Bishop: c = 'b'; break;
    case PieceKind::Rook: c = 'r'; break;
    case PieceKind::Queen: c = 'q'; break;
    case PieceKind::King: c = 'k'; break;
  }
  return color == Color::White ? static_cast<char>(c - 'a' + 'A') : c;
}

std::string FenRecord::serialize() const {
  return fmt::format("{} {} {} {} {} {}", placement_of(board_), side_ == Color::White ? 'w' : 'b', castling_,
                     en_passant_, halfmove_, fullmove_);
}

FenRecord parse_fen(std::string_view text) {
  const auto fields = split_fields(text);
  if (fields.empty()) malformed(text, "empty FEN");
  if (fields.size() != 6) malformed(text, fmt::format("expected 6 fields, found {}", fields.size()));

  FenRecord rec;
  const std::string_view placement = fields[0];
  int rank = 0;
  int file = 0;
  bool prev_digit = false;
  for (char c : placement) {
    if (c == '/') {
      if (file != 8) malformed(text, fmt::format("rank {} spans {} squares", 8 - rank, file));
      if (++rank >= 8) malformed(text, "more than 8 ranks");
      file = 0;
      prev_digit = false;
      continue;
    }
    if (c >= '1' && c <= '8') {
      // Adjacent digits ("44") would not survive re-serialization.
      if (prev_digit) malformed(text, "adjacent empty-square digits");
      file += c - '0';
      prev_digit = true;
    } else {
      Square sq;
      if (!piece_from_letter(c, sq)) malformed(text, fmt::format("illegal character '{}'", c));
      if (file < 8) rec.board_[rank * 8 + file] = sq;
      ++file;
      prev_digit = false;
    }
    if (file > 8) malformed(text, fmt::format("rank {} spans more than 8 squares", 8 - rank));
  }
  if (rank != 7) malformed(text, fmt::format("expected 8 ranks, found {}", rank + 1));
  if (file != 8) malformed(text, fmt::format("rank 1 spans {} squares", file));

  if (fields[1] == "w") {
    rec.side_ = Color::White;
  } else if (fields[1] == "b") {
    rec.side_ = Color::Black;
  } else {
    malformed(text, "side to move must be 'w' or 'b'");
  }

  const std::string_view castling = fields[2];
  if (castling != "-") {
    constexpr std::string_view order = "KQkq";
    std::size_t next = 0;
    for (char c : castling) {
      const auto pos = order.find(c, next);
      if (pos == std::string_view::npos) malformed(text, "bad castling field");
      next = pos + 1;
    }
  }
  rec.castling_ = std::string(castling);

  const std::string_view ep = fields[3];
  if (ep != "-" && !(ep.size() == 2 && ep[0] >= 'a' && ep[0] <= 'h' && (ep[1] == '3' || ep[1] == '6'))) {
    malformed(text, "bad en passant field");
  }
  rec.en_passant_ = std::string(ep);
  rec.halfmove_ = parse_counter(fields[4], text, "halfmove clock");
  rec.fullmove_ = parse_counter(fields[5], text, "fullmove number");

  int white_kings = 0;
  int black_kings = 0;
  for (const Square& sq : rec.board_) {
    if (sq.kind != PieceKind::King) continue;
    (sq.color == Color::White ? white_kings : black_kings) += 1;
  }
  if (white_kings != 1 || black_kings != 1) {
    throw Error(Errc::IllegalPosition,
                fmt::format("{} white and {} black kings in \"{}\"", white_kings, black_kings, text));
  }

  rec.text_ = rec.serialize();
  return rec;
}

CanonicalBuffer canonical_buffer(const FenRecord& fen) {
  const std::string& text = fen.text();
  if (text.size() > kBufferLength) {
    throw Error(Errc::FenTooLong, fmt::format("{} bytes exceeds {}", text.size(), kBufferLength));
  }
  CanonicalBuffer buf;
  buf.fill(kFillByte);
  for (std::size_t i = 0; i < text.size(); ++i) buf[i] = static_cast<std::uint8_t>(text[i]);
  return buf;
}

std::size_t mismatch_count(const CanonicalBuffer& a, const CanonicalBuffer& b) noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < kBufferLength; ++i) n += a[i] != b[i];
  return n;
}

double change_value(const CanonicalBuffer& a, const CanonicalBuffer& b) noexcept {
  return static_cast<double>(mismatch_count(a, b)) * kCvQuantum;
}

double change_value(const FenRecord& a, const FenRecord& b) {
  return change_value(canonical_buffer(a), canonical_buffer(b));
}

double ByteBufferMetric::operator()(const FenRecord& a, const FenRecord& b) const { return change_value(a, b); }

std::string format_cv(double cv) {
  // nearbyint honours the default round-to-nearest-even mode.
  const double scaled = std::nearbyint(cv * 1000.0);
  return fmt::format("{:.3f}", scaled / 1000.0);
}

}  // namespace cvrank
