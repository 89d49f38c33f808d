#pragma once

#include <stdexcept>
#include <string>

namespace birgat {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric layer.
struct ShapeMismatch : Error {
  using Error::Error;
};
struct NonFiniteValue : Error {
  using Error::Error;
};
struct NonFiniteGradient : Error {
  using Error::Error;
};

// Data / schema layer. Anything here maps to CLI exit code 2.
struct SchemaError : Error {
  using Error::Error;
};
struct IoError : SchemaError {
  using SchemaError::SchemaError;
};
struct MalformedDocument : SchemaError {
  using SchemaError::SchemaError;
};
struct OrphanItem : SchemaError {
  using SchemaError::SchemaError;
};
struct DuplicateName : SchemaError {
  using SchemaError::SchemaError;
};
struct UnknownDomain : SchemaError {
  using SchemaError::SchemaError;
};
struct EmptySelection : SchemaError {
  using SchemaError::SchemaError;
};
struct InvalidFrame : SchemaError {
  using SchemaError::SchemaError;
};
struct DomainNotInGrammar : SchemaError {
  using SchemaError::SchemaError;
};
struct SameDomain : SchemaError {
  using SchemaError::SchemaError;
};
struct BadRatios : SchemaError {
  using SchemaError::SchemaError;
};
struct GoldContainsUnknownOntologyItem : SchemaError {
  using SchemaError::SchemaError;
};
struct InsufficientFewShotPool : SchemaError {
  using SchemaError::SchemaError;
};

// Check suites (gradcheck & co). Maps to CLI exit code 3.
struct CheckFailure : Error {
  using Error::Error;
};

// CLI usage problems. Maps to exit code 1.
struct UsageError : Error {
  using Error::Error;
};

}  // namespace birgat
