#pragma once

#include <stdexcept>
#include <string>

namespace liconf {

// Base for every error raised by the library. Callers that only need to
// report a failure can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A trace record failed schema or invariant validation.
class ValidationError : public Error {
 public:
  ValidationError(std::size_t record, std::string field, const std::string& what)
      : Error("record " + std::to_string(record) + ", field '" + field + "': " + what),
        record_(record),
        field_(std::move(field)) {}

  std::size_t record() const noexcept { return record_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t record_;
  std::string field_;
};

// An argument violated an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace liconf
