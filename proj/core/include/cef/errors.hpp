#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cef {

/// Bad input: malformed patterns, streams, files or configuration.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal guarantee was broken (e.g. an unsound satisfiability oracle).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class MissingAttribute : public DataError {
 public:
  explicit MissingAttribute(std::string name)
      : DataError("missing attribute '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : DataError(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class UnboundVariable : public DataError {
 public:
  explicit UnboundVariable(const std::string& name)
      : DataError("variable '" + name + "' has no binding in the WHERE clause") {}
};

class UnknownPredicate : public DataError {
 public:
  explicit UnknownPredicate(const std::string& name)
      : DataError("unknown predicate '" + name + "'") {}
};

class NoMatchingMinterm : public InvariantViolation {
 public:
  NoMatchingMinterm()
      : InvariantViolation("event satisfies no minterm; the satisfiability oracle pruned a live combination") {}
};

class EmptyTraining : public DataError {
 public:
  EmptyTraining() : DataError("training stream is empty") {}
};

class StateCapExceeded : public DataError {
 public:
  StateCapExceeded(std::size_t cap)
      : DataError("disambiguation exceeded the state cap of " + std::to_string(cap)) {}
};

class FinalStateQuery : public InvariantViolation {
 public:
  explicit FinalStateQuery(std::size_t state)
      : InvariantViolation("waiting time requested for final state " + std::to_string(state)) {}
};

class HorizonTooShort : public DataError {
 public:
  explicit HorizonTooShort(std::vector<std::size_t> states)
      : DataError(message(states)), states_(std::move(states)) {}
  const std::vector<std::size_t>& states() const noexcept { return states_; }

 private:
  static std::string message(const std::vector<std::size_t>& states) {
    std::string s = "waiting-time mass within the horizon is below the threshold for state(s)";
    for (auto q : states) s += " " + std::to_string(q);
    return s;
  }
  std::vector<std::size_t> states_;
};

class MismatchedLogs : public DataError {
 public:
  explicit MismatchedLogs(const std::string& detail)
      : DataError("forecast and detection logs do not come from the same replay: " + detail) {}
};

class UninvertibleMinterm : public DataError {
 public:
  explicit UninvertibleMinterm(const std::string& minterm)
      : DataError("no attribute assignment found for minterm " + minterm) {}
};

}  // namespace cef
