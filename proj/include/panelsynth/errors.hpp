#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace panelsynth {

// Base of every error thrown by the library. Two broad families matter for
// the CLI exit-code contract: InputError (bad files / bad panels, exit 2)
// and everything else (estimation failures, exit 1), with DidNotConverge
// singled out (exit 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

// -- panel construction ------------------------------------------------------

class EmptyInput : public InputError {
 public:
  using InputError::InputError;
};

class DuplicateCell : public InputError {
 public:
  using InputError::InputError;
};

class UnbalancedPanel : public InputError {
 public:
  UnbalancedPanel(std::string msg,
                  std::vector<std::pair<std::string, std::string>> missing_cells)
      : InputError(std::move(msg)), missing(std::move(missing_cells)) {}
  std::vector<std::pair<std::string, std::string>> missing;  // (unit, period)
};

class NoControls : public InputError {
 public:
  using InputError::InputError;
};

class NoTreated : public InputError {
 public:
  using InputError::InputError;
};

class NoPrePeriods : public InputError {
 public:
  using InputError::InputError;
};

class NoPostPeriods : public InputError {
 public:
  using InputError::InputError;
};

// Treated units whose adoption dates differ cannot be cast to a block design.
class NonBlockAdoption : public InputError {
 public:
  using InputError::InputError;
};

// -- weights / solver --------------------------------------------------------

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InsufficientPrePeriods : public Error {
 public:
  using Error::Error;
};

class DidNotConverge : public Error {
 public:
  DidNotConverge(std::string msg, std::vector<double> best_iterate, double obj)
      : Error(std::move(msg)), best(std::move(best_iterate)), objective(obj) {}
  std::vector<double> best;
  double objective;
};

// -- inference ---------------------------------------------------------------

class DegenerateDesign : public Error {
 public:
  using Error::Error;
};

class TooManyRedraws : public Error {
 public:
  using Error::Error;
};

class ProvenanceMismatch : public Error {
 public:
  using Error::Error;
};

// -- oracles -----------------------------------------------------------------

class TooManyColumns : public Error {
 public:
  using Error::Error;
};

// -- ingestion ---------------------------------------------------------------

class FileNotFound : public InputError {
 public:
  using InputError::InputError;
};

class SchemaMismatch : public InputError {
 public:
  SchemaMismatch(std::string msg, std::vector<std::string> missing_columns)
      : InputError(std::move(msg)), missing(std::move(missing_columns)) {}
  std::vector<std::string> missing;
};

class NoValidRows : public InputError {
 public:
  using InputError::InputError;
};

class EmptyAfterFilters : public InputError {
 public:
  using InputError::InputError;
};

class MissingPopulation : public InputError {
 public:
  MissingPopulation(std::string msg, std::vector<std::string> economies_missing)
      : InputError(std::move(msg)), economies(std::move(economies_missing)) {}
  std::vector<std::string> economies;
};

// -- reporting ---------------------------------------------------------------

class IncompleteBundle : public Error {
 public:
  using Error::Error;
};

class IoError : public InputError {
 public:
  using InputError::InputError;
};

// Exit-code contract: 0 success, 1 estimation error, 2 input/data error,
// 3 convergence failure.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DidNotConverge*>(&e) != nullptr) return 3;
  if (dynamic_cast<const InputError*>(&e) != nullptr) return 2;
  return 1;
}

}  // namespace panelsynth
