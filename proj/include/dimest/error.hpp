#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dimest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on shapes, ranges or finiteness of an argument was violated.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// An object was used outside of its protocol (e.g. a tape consumed twice).
class ContractViolation : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class IntegrationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateSpectrum : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// The training loss became non-finite.
class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(std::size_t step, const std::string& what)
        : NumericalError("training diverged at step " + std::to_string(step) + ": " + what),
          step_(step) {}

    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class UsageError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidInput(msg);
}

}  // namespace detail
}  // namespace dimest
