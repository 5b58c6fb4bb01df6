#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace libracool {

/// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
    invalid_input,
    config,
    integration_fault,
    runaway,
    protocol,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& what) : Error(ErrorCategory::invalid_input, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

/// NaN or infinity appeared while integrating; carries the internal step index.
class IntegrationFault : public Error {
public:
    IntegrationFault(std::size_t step, const std::string& what)
        : Error(ErrorCategory::integration_fault, what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// A mode left the small-angle regime.
class RunawayError : public Error {
public:
    RunawayError(std::size_t step, std::string mode, double angle, const std::string& what)
        : Error(ErrorCategory::runaway, what), step_(step), mode_(std::move(mode)), angle_(angle) {}

    std::size_t step() const noexcept { return step_; }
    const std::string& mode() const noexcept { return mode_; }
    double angle() const noexcept { return angle_; }

private:
    std::size_t step_;
    std::string mode_;
    double angle_;
};

class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& what) : Error(ErrorCategory::protocol, what) {}
};

namespace detail {

inline void require(bool condition, std::string_view message) {
    if (!condition) {
        throw InvalidInput(std::string(message));
    }
}

}  // namespace detail

}  // namespace libracool
