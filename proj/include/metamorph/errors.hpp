#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metamorph {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point was evaluated outside the closed unit square.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Sparse SPD solve failed; `index` is the row where the breakdown was detected.
class SolverError : public Error {
public:
    SolverError(const std::string& what, std::size_t index)
        : Error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// det DPhi fell below the diffeomorphism guard at some evaluation point.
class DegenerateDeformationError : public Error {
public:
    DegenerateDeformationError(const std::string& what, double x, double y, double det)
        : Error(what), x_(x), y_(y), det_(det) {}
    double x() const noexcept { return x_; }
    double y() const noexcept { return y_; }
    double det() const noexcept { return det_; }

private:
    double x_, y_, det_;
};

/// Fixed-point iteration hit its cap.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, double last_difference, int iterations)
        : Error(what), last_difference_(last_difference), iterations_(iterations) {}
    double last_difference() const noexcept { return last_difference_; }
    int iterations() const noexcept { return iterations_; }

private:
    double last_difference_;
    int iterations_;
};

/// A query point is covered by no deformed spline cell (fold-over).
class InversionError : public Error {
public:
    using Error::Error;
};

// I/O and configuration
class InputError : public Error {
public:
    using Error::Error;
};

class DimensionError : public InputError {
public:
    using InputError::InputError;
};

class FormatError : public InputError {
public:
    using InputError::InputError;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace metamorph
