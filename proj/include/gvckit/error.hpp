#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gvckit {

// Malformed input file. Line and column are 1-based; 0 means "not applicable".
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, std::size_t column, const std::string& what);

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string file_;
    std::size_t line_;
    std::size_t column_;
};

// Linear-algebra failure: singular systems, residual bounds not met, rank collapse.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inputs that are well-formed but do not satisfy an operation's preconditions.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Regression that cannot produce a meaningful estimate (constant outcome, missing post rows, ...).
class DegenerateFit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gvckit
