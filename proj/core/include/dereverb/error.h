// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_ERROR_H_
#define DEREVERB_ERROR_H_

#include <stdexcept>
#include <string>

namespace dereverb {

// Shapes or sizes of operands disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad or missing data on disk, malformed files, unusable inputs.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during training (NaN loss, NaN gradient).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint-specific failures; the kind distinguishes the cause.
class CheckpointError : public DataError {
 public:
  enum class Kind { kBadMagic, kVersion, kTruncated, kShape, kConfig };
  CheckpointError(Kind kind, const std::string& what)
      : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace dereverb

#endif  // DEREVERB_ERROR_H_
