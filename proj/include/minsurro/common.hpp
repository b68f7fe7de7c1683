#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace minsurro {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when a caller breaks an operation's precondition (dimension
/// mismatch, empty piece list, negative multiplier, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raised for malformed or inconsistent input data (files, datasets).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A loss or prediction evaluated to NaN/Inf; carries the first offending
/// sample index (or -1 when it cannot be attributed to a sample).
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, long sample)
        : std::runtime_error(what), sample_(sample) {}
    long sample() const noexcept { return sample_; }

private:
    long sample_;
};

inline void require(bool cond, const char* msg) {
    if (!cond) throw ContractError(msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

} // namespace minsurro
