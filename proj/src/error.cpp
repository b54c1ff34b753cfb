#include "cvrank/error.hpp"

namespace cvrank {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedFen: return "MalformedFen";
    case Errc::IllegalPosition: return "IllegalPosition";
    case Errc::FenTooLong: return "FenTooLong";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::Io: return "Io";
    case Errc::NoUsableGames: return "NoUsableGames";
    case Errc::HoldoutTooLarge: return "HoldoutTooLarge";
    case Errc::DuplicateFen: return "DuplicateFen";
    case Errc::SampleTooSmall: return "SampleTooSmall";
    case Errc::InvalidDf: return "InvalidDf";
    case Errc::EmptySample: return "EmptySample";
    case Errc::EmptyDatabase: return "EmptyDatabase";
    case Errc::DatabaseTooSmall: return "DatabaseTooSmall";
    case Errc::ChunkSizeMismatch: return "ChunkSizeMismatch";
    case Errc::InsufficientBaseline: return "InsufficientBaseline";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace cvrank
