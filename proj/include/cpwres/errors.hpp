#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cpwres {

// Base for everything the library throws on bad input or failed geometry.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical or physical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Point sets that do not determine a circle (collinear, coincident).
class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

// Parameter combinations that would imply negative loss or negative Qi.
class UnphysicalError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::string source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what),
          source_(std::move(source)),
          line_(line) {}

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

class SchemaError : public Error {
public:
    SchemaError(std::string field_path, const std::string& what)
        : Error(field_path + ": " + what), field_path_(std::move(field_path)) {}

    const std::string& field_path() const noexcept { return field_path_; }

private:
    std::string field_path_;
};

}  // namespace cpwres
