#ifndef PSLIB_ERRORS_HPP
#define PSLIB_ERRORS_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pslib {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input file does not carry a column the schema asks for.
class SchemaError : public Error {
public:
    using Error::Error;
};

// A single data row violates the record contract. `row` is 1-based over data rows.
class ValidationError : public Error {
public:
    ValidationError(std::size_t row, const std::string& what)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

// Inconsistent run or model configuration (partition policy, discount factor, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Argument outside the domain of a function (e.g. t > tau_J).
class DomainError : public Error {
public:
    using Error::Error;
};

// Matrix factorization failed even after jitter; carries the offending matrix.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, Eigen::MatrixXd matrix)
        : Error(what), matrix_(std::move(matrix)) {}
    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }

private:
    Eigen::MatrixXd matrix_;
};

// Every importance weight is -inf or NaN.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

}  // namespace pslib

#endif
