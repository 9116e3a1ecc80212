#pragma once

#include <stdexcept>
#include <string>

namespace edi {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidThreshold : public Error {
 public:
  using Error::Error;
};

class InvalidWindow : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  OutOfBounds(const std::string& what, int x, int y) : Error(what), x_(x), y_(y) {}
  int x() const noexcept { return x_; }
  int y() const noexcept { return y_; }

 private:
  int x_;
  int y_;
};

class CoverageError : public Error {
 public:
  CoverageError(const std::string& what, double missing_begin, double missing_end)
      : Error(what), missing_begin_(missing_begin), missing_end_(missing_end) {}
  double missing_begin() const noexcept { return missing_begin_; }
  double missing_end() const noexcept { return missing_end_; }

 private:
  double missing_begin_;
  double missing_end_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class OptimizationFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline void require_threshold(double c) {
  if (!(c > 0.0)) {
    throw InvalidThreshold("contrast threshold must be positive, got " + std::to_string(c));
  }
}

}  // namespace edi
