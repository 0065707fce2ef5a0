#pragma once

#include <stdexcept>
#include <string>

namespace triad {

// Process exit codes. Every documented failure maps to exactly one code.
enum class ExitStatus : int {
    ok = 0,
    input_error = 1,     // bad input / configuration
    provider_error = 2,  // provider / network failure
    budget_error = 3,    // token budget violation
    parse_error = 4,     // document / metrics parse failure
};

class Error : public std::runtime_error {
public:
    Error(ExitStatus status, const std::string& message)
        : std::runtime_error(message), status_(status) {}

    ExitStatus status() const noexcept { return status_; }
    int exit_code() const noexcept { return static_cast<int>(status_); }

private:
    ExitStatus status_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(ExitStatus::input_error, message) {}
};

class InputError : public Error {
public:
    explicit InputError(const std::string& message) : Error(ExitStatus::input_error, message) {}
};

class BudgetError : public Error {
public:
    explicit BudgetError(const std::string& message) : Error(ExitStatus::budget_error, message) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error(ExitStatus::parse_error, message) {}
};

// Raised when a provider call fails for good. Carries the last HTTP payload
// verbatim so callers can surface it for diagnosis.
class ProviderError : public Error {
public:
    ProviderError(std::string provider_id, int final_status, std::string response_payload,
                  int attempts, const std::string& message)
        : Error(ExitStatus::provider_error, message),
          provider_id(std::move(provider_id)),
          final_status(final_status),
          response_payload(std::move(response_payload)),
          attempts(attempts) {}

    std::string provider_id;
    int final_status = 0;
    std::string response_payload;
    int attempts = 0;
};

}  // namespace triad
