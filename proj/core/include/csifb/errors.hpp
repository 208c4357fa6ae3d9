#pragma once

#include <stdexcept>
#include <string>

namespace csifb {

// Precondition or invariant violated by caller-supplied values.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// A structured input file did not match its documented schema.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& field, const std::string& what);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Bit-level or byte-level framing problems (QAM framing, wire format).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Linear algebra failed (singular systems, SVD non-convergence).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// The adaptive policy was asked about an SNR bucket it has no measurements for.
class PolicyError : public std::runtime_error {
 public:
  explicit PolicyError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace csifb
