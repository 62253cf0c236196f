#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdgd {

// Base of every error raised by the library. Each subclass names one failure
// class so callers (and the CLI exit-code mapping) can dispatch on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class StabilityError : public Error {
public:
    StabilityError(const std::string& what, double spectral_radius)
        : Error(what), spectral_radius_(spectral_radius) {}
    [[nodiscard]] double spectral_radius() const noexcept { return spectral_radius_; }

private:
    double spectral_radius_;
};

class SingularityError : public Error {
public:
    SingularityError(const std::string& what, double condition_estimate)
        : Error(what), condition_estimate_(condition_estimate) {}
    [[nodiscard]] double condition_estimate() const noexcept { return condition_estimate_; }

private:
    double condition_estimate_;
};

class ConnectivityError : public Error {
public:
    ConnectivityError(const std::string& what, std::vector<std::vector<std::size_t>> components)
        : Error(what), components_(std::move(components)) {}
    [[nodiscard]] const std::vector<std::vector<std::size_t>>& components() const noexcept {
        return components_;
    }

private:
    std::vector<std::vector<std::size_t>> components_;
};

class NotStochasticError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ConfigurationError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what), step_(step) {}
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace fdgd
