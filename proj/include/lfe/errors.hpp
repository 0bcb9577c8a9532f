#pragma once

#include <stdexcept>
#include <string>

namespace lfe {

// Base error for everything the library throws. The CLI maps ConfigError to
// exit 2 and every other Error to exit 3; audit findings are reported in
// summaries rather than thrown.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// seqspace
class ZeroVector : public Error {
 public:
  using Error::Error;
};

// metricspace
class GeneratorOverflow : public Error {
 public:
  using Error::Error;
};

// chain
class NonUniform : public Error {
 public:
  using Error::Error;
};
class NoConvergence : public Error {
 public:
  using Error::Error;
};
class HorizonExhausted : public Error {
 public:
  using Error::Error;
};
class JitterTooLarge : public Error {
 public:
  using Error::Error;
};

// glue
class OutOfRange : public Error {
 public:
  using Error::Error;
};

// audit
class DegenerateImage : public Error {
 public:
  using Error::Error;
};
class BoundViolated : public Error {
 public:
  using Error::Error;
};

}  // namespace lfe
