#pragma once

#include <stdexcept>
#include <string>

namespace faultrom {

/// Failure categories. The CLI maps them to exit codes 2, 3 and 4.
enum class ErrorKind { Config, Numerical, MissingInput };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

struct MissingInputError : Error {
    explicit MissingInputError(const std::string& what) : Error(ErrorKind::MissingInput, what) {}
};

}  // namespace faultrom
