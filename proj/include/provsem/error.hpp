// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace provsem {

// Error taxonomy maps onto the CLI exit codes: Data -> 1, Config -> 2, Provider -> 3.
enum class ErrorKind { Data, Config, Provider };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Malformed JSON input; carries the byte offset reported by the parser.
class ParseError : public Error {
public:
    ParseError(std::string message, std::size_t byte_offset)
        : Error(ErrorKind::Data, std::move(message)), byte_offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

// A record that parses as JSON but violates the event schema; names the field.
class SchemaError : public Error {
public:
    SchemaError(std::string message, std::string field)
        : Error(ErrorKind::Data, std::move(message)), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Remote provider failure after bounded retries; carries the request key when known.
class ProviderError : public Error {
public:
    explicit ProviderError(std::string message, std::string request_key = {})
        : Error(ErrorKind::Provider, std::move(message)),
          request_key_(std::move(request_key)) {}

    const std::string& request_key() const noexcept { return request_key_; }

private:
    std::string request_key_;
};

}  // namespace provsem
