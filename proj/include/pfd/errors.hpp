#pragma once

#include <stdexcept>
#include <string>

namespace pfd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Counts of positive, negative and (numerically) zero eigenvalues.
struct EigenSignature {
  int positive = 0;
  int negative = 0;
  int zero = 0;
};

class NotAnEllipse : public Error {
 public:
  NotAnEllipse(const std::string& what, EigenSignature signature)
      : Error(what), signature_(signature) {}

  [[nodiscard]] const EigenSignature& signature() const noexcept { return signature_; }

 private:
  EigenSignature signature_;
};

class DegenerateProjection : public Error {
 public:
  using Error::Error;
};

class NoFiniteCenter : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class InitializationFailed : public Error {
 public:
  using Error::Error;
};

class DegenerateMask : public Error {
 public:
  using Error::Error;
};

}  // namespace pfd
