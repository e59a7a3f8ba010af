#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cosur {

// Each kind maps to one CLI exit code (see exit_code()).
enum class ErrorKind {
  Io,
  Format,
  InvalidArgument,
  DimensionMismatch,
  NonFinite,
  RankDeficient,
  UnknownToken,
  MissingHead,
  Unlabeled,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Rank deficiency carries the effective rank so callers (sweep-k) can report it.
class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& what, long effective_rank)
      : Error(ErrorKind::RankDeficient, what), effective_rank_(effective_rank) {}

  long effective_rank() const noexcept { return effective_rank_; }

 private:
  long effective_rank_;
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Process exit code used by the CLI for an error of this kind. 0 and 1 are
/// reserved for success and usage errors.
int exit_code(ErrorKind kind) noexcept;

}  // namespace cosur
