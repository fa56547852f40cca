#pragma once

#include <stdexcept>
#include <string>

namespace gex {

// Bad inputs or precondition violations (CLI exit code 2).
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: factorisation, underflow, non-finite results (exit code 3).
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimiser did not converge or produced a degenerate fit (exit code 3).
class fit_error : public std::runtime_error {
public:
    explicit fit_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A sampler could not produce valid draws (exit code 3).
class sampling_error : public std::runtime_error {
public:
    explicit sampling_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing upstream artifact in the pipeline (exit code 4).
class dependency_error : public std::runtime_error {
public:
    explicit dependency_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gex
