#pragma once

#include <stdexcept>
#include <string>

namespace memetrn {

// Shape disagreement between operands. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Integer index outside its valid range (embedding ids, positions, vocab ids).
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Caller supplied data that violates a documented precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file content; messages carry the line number when known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed data that breaks a cross-record invariant (e.g. duplicate ids).
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric cannot be evaluated on the given inputs (e.g. single-class AUROC).
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Misuse of an API contract (non-scalar backward root, double backward).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace memetrn
