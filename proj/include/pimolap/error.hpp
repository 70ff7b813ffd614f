#pragma once

#include <stdexcept>
#include <string>

namespace pimolap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad array geometry, column or row index.
class CrossbarError : public Error {
 public:
  using Error::Error;
};

// Schema does not fit, unknown attribute, value overflow, scratch exhaustion.
class LayoutError : public Error {
 public:
  using Error::Error;
};

class ScratchExhausted : public LayoutError {
 public:
  ScratchExhausted(unsigned requested, unsigned available)
      : LayoutError("scratch exhausted: requested " + std::to_string(requested) +
                    " columns, largest free run is " + std::to_string(available)),
        requested_(requested),
        available_(available) {}

  unsigned requested() const { return requested_; }
  unsigned available() const { return available_; }

 private:
  unsigned requested_;
  unsigned available_;
};

// Predicate/arithmetic compilation or primitive misuse.
class CompileError : public Error {
 public:
  using Error::Error;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace pimolap
