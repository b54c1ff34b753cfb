#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace cvrank {

enum class Color : std::uint8_t { White, Black };

enum class PieceKind : std::uint8_t { None, Pawn, Knight, Bishop, Rook, Queen, King };

struct Square {
  PieceKind kind = PieceKind::None;
  Color color = Color::White;

  bool empty() const noexcept { return kind == PieceKind::None; }
  /// FEN letter for the piece, or '.' for an empty square.
  char glyph() const noexcept;
  friend bool operator==(const Square&, const Square&) = default;
};

/// Board squares indexed rank-major from a8 (index 0) to h1 (index 63), the
/// order in which FEN lists them.
using Board = std::array<Square, 64>;

/// Validated six-field FEN. The stored text is the normalized form (single
/// spaces between fields, no surrounding whitespace).
class FenRecord {
 public:
  const std::string& text() const noexcept { return text_; }
  const Board& board() const noexcept { return board_; }
  Color side_to_move() const noexcept { return side_; }
  const std::string& castling() const noexcept { return castling_; }
  const std::string& en_passant() const noexcept { return en_passant_; }
  std::uint64_t halfmove_clock() const noexcept { return halfmove_; }
  std::uint64_t fullmove_number() const noexcept { return fullmove_; }

  /// Square at file 0..7 (a..h) and rank 0..7 (1..8).
  const Square& at(int file, int rank) const noexcept { return board_[(7 - rank) * 8 + file]; }

  /// Rebuilds the FEN text from the parsed fields.
  std::string serialize() const;

  friend bool operator==(const FenRecord& a, const FenRecord& b) noexcept { return a.text_ == b.text_; }

 private:
  friend FenRecord parse_fen(std::string_view text);

  std::string text_;
  Board board_{};
  Color side_ = Color::White;
  std::string castling_ = "-";
  std::string en_passant_ = "-";
  std::uint64_t halfmove_ = 0;
  std::uint64_t fullmove_ = 1;
};

/// Throws Error{MalformedFen} or Error{IllegalPosition}.
FenRecord parse_fen(std::string_view text);

inline constexpr std::size_t kBufferLength = 128;
inline constexpr std::uint8_t kFillByte = 0x20;
/// One differing byte out of 128, as a percentage.
inline constexpr double kCvQuantum = 100.0 / static_cast<double>(kBufferLength);

using CanonicalBuffer = std::array<std::uint8_t, kBufferLength>;

/// FEN text bytes followed by space fill. Throws Error{FenTooLong}.
CanonicalBuffer canonical_buffer(const FenRecord& fen);

/// Number of byte positions at which two canonical buffers differ.
std::size_t mismatch_count(const CanonicalBuffer& a, const CanonicalBuffer& b) noexcept;

/// Strategy for measuring the change between two consecutive positions.
/// Returned values are percentages in [0, 100].
class ChangeMetric {
 public:
  virtual ~ChangeMetric() = default;
  virtual double operator()(const FenRecord& a, const FenRecord& b) const = 0;
};

/// Positional byte comparison of the space-padded 128-byte FEN text.
class ByteBufferMetric final : public ChangeMetric {
 public:
  double operator()(const FenRecord& a, const FenRecord& b) const override;
};

/// Percentage of the 128 buffer bytes that differ between the two FENs.
double change_value(const FenRecord& a, const FenRecord& b);
double change_value(const CanonicalBuffer& a, const CanonicalBuffer& b) noexcept;

/// Display form of a change value: three decimals, ties rounded to even.
std::string format_cv(double cv);

}  // namespace cvrank
