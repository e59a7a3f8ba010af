#include "cosur/error.hpp"

namespace cosur {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::NonFinite: return "non_finite";
    case ErrorKind::RankDeficient: return "rank_deficient";
    case ErrorKind::UnknownToken: return "unknown_token";
    case ErrorKind::MissingHead: return "missing_head";
    case ErrorKind::Unlabeled: return "unlabeled";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return 3;
    case ErrorKind::Format: return 4;
    case ErrorKind::InvalidArgument: return 5;
    case ErrorKind::DimensionMismatch: return 6;
    case ErrorKind::NonFinite: return 7;
    case ErrorKind::RankDeficient: return 8;
    case ErrorKind::UnknownToken: return 9;
    case ErrorKind::MissingHead: return 10;
    case ErrorKind::Unlabeled: return 11;
  }
  return 1;
}

}  // namespace cosur
