#pragma once

#include <stdexcept>
#include <string>

namespace lmsearch {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid space files, configs, codes, tables, CLI inputs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failures while computing P(a): missing table rows, external command
/// failures, enumeration caps.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// LLM endpoint misconfiguration (bad URL, missing API key env var).
class EndpointError : public Error {
 public:
  using Error::Error;
};

/// Command-line usage problems.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace lmsearch
