#pragma once

#include <stdexcept>
#include <string>

namespace relner {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// Bad configuration, missing files named in config, invalid flag values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed corpus or artifact files (CoNLL, YEDDA, JSONL, profiles).
class DataFormatError : public Error {
 public:
  using Error::Error;
};

// Prompt template missing a required placeholder.
class TemplateError : public Error {
 public:
  using Error::Error;
};

class GatewayError : public Error {
 public:
  using Error::Error;
};

// Network-level failure that survived the retry budget.
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

// 429 after the retry budget; retry_after_ms carries the last server hint.
class RateLimitedError : public GatewayError {
 public:
  RateLimitedError(const std::string& message, long retry_after_ms)
      : GatewayError(message), retry_after_ms(retry_after_ms) {}
  long retry_after_ms = 0;
};

// Auth or model errors; never retried.
class BackendRefusedError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

// The mock backend has no script entry for the request.
class MockMissError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

// Relation generation produced zero parseable phrases.
class GenerationEmptyError : public Error {
 public:
  using Error::Error;
};

// No well-formed pair array anywhere in a backend response.
class ParseFailureError : public Error {
 public:
  using Error::Error;
};

// Similarity provider failure (embedding endpoint down, bad dimension).
class ProviderError : public Error {
 public:
  using Error::Error;
};

}  // namespace relner
