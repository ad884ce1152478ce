#pragma once

#include <stdexcept>
#include <string>

namespace divprice {

/// Argument outside the domain of an operation (fraction outside [0,1],
/// negative price, invalid parameters).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Curvature undefined because v(1) = 0.
class DegenerateValuation : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Exhaustive enumeration would exceed the configured outcome budget.
class EnumerationTooLarge : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Valuation family not supported by an operation (continuous scalar part,
/// unbounded marginal value at zero).
class UnsupportedValuation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed experiment configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace divprice
