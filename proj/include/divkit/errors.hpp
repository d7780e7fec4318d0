#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace divkit {

/// Base class for every failure raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A JSONL line (or other structured input) could not be parsed.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : Error(msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A record violates a data-model invariant (e.g. rewards/responses mismatch).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An operation was called with arguments outside its contract.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A value that must be non-positive (or otherwise bounded) was not.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The requested quantity is undefined on this input (e.g. empty gram bag).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Least-squares fit is undefined: fewer than two points or no spread in x.
class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

/// Decay grid search found no grid point with an ascending diversity profile.
class NoFeasibleDecayError : public Error {
 public:
  using Error::Error;
};

/// Decay grid search could not fit a line at any grid point.
class SearchFailedError : public Error {
 public:
  using Error::Error;
};

/// Rewards are not ordered consistently with the ranking they annotate.
class OrderingError : public Error {
 public:
  using Error::Error;
};

/// Subset construction failed (size exceeds corpus, ranking too short, ...).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// A reward scorer failed while re-ranking a sample.
class ScoringError : public Error {
 public:
  using Error::Error;
};

/// Remote scoring failed after exhausting the retry budget.
class TransportError : public Error {
 public:
  TransportError(const std::string& msg, int attempts, int last_status)
      : Error(msg), attempts_(attempts), last_status_(last_status) {}
  int attempts() const { return attempts_; }
  /// Last HTTP status observed, or 0 if the failure was below HTTP.
  int last_status() const { return last_status_; }

 private:
  int attempts_;
  int last_status_;
};

/// A batch scoring call failed; carries the lowest failing request index.
class BatchScoreError : public Error {
 public:
  BatchScoreError(const std::string& msg, std::size_t failed_index)
      : Error(msg), failed_index_(failed_index) {}
  std::size_t failed_index() const { return failed_index_; }

 private:
  std::size_t failed_index_;
};

/// The candidate pool ran dry before the requested growth was reached.
class AugmentationUnderflowError : public Error {
 public:
  AugmentationUnderflowError(const std::string& msg, std::uint64_t added,
                             std::uint64_t requested)
      : Error(msg), added_(added), requested_(requested) {}
  std::uint64_t added() const { return added_; }
  std::uint64_t requested() const { return requested_; }

 private:
  std::uint64_t added_;
  std::uint64_t requested_;
};

}  // namespace divkit
