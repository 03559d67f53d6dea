#pragma once

#include <stdexcept>
#include <string>

namespace doedr {

/// Base of every error raised by the library. The category is used by the
/// command-line tool to select an exit status.
class Error : public std::runtime_error {
  public:
    enum class Category { Config = 2, Input = 3, Numerical = 4, Io = 5 };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

  private:
    Category category_;
};

/// Malformed or inconsistent configuration (feeder, study, profile files).
class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& what) : Error(Category::Config, what) {}
};

/// Argument outside an operation's domain (negative power, NaN injection...).
class InputError : public Error {
  public:
    explicit InputError(const std::string& what) : Error(Category::Input, what) {}
};

/// Load flow did not converge within the iteration cap.
class ConvergenceError : public Error {
  public:
    ConvergenceError(const std::string& what, double last_residual, int iterations)
        : Error(Category::Numerical, what), last_residual_(last_residual), iterations_(iterations) {}

    double last_residual() const noexcept { return last_residual_; }
    int iterations() const noexcept { return iterations_; }

  private:
    double last_residual_;
    int iterations_;
};

/// No sampled scenario survived the network check for some household.
class EnvelopeError : public Error {
  public:
    EnvelopeError(const std::string& what, std::string household)
        : Error(Category::Numerical, what), household_(std::move(household)) {}

    const std::string& household() const noexcept { return household_; }

  private:
    std::string household_;
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& what) : Error(Category::Io, what) {}
};

}  // namespace doedr
