#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cctml {

/// Malformed input text (CSV, schema, model dumps). Carries the 1-based line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Input that parses but does not conform to the declared schema.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition was violated by the caller.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A learner could not produce a model.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A simulation submodel binding or covariate could not be resolved.
class BindingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cctml
