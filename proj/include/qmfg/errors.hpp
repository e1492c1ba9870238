#pragma once

#include <stdexcept>
#include <string>

namespace qmfg {

/// Argument outside the mathematical domain of an operation (e.g. alpha not in (0,1)).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A parameter set or configuration violates one of its stated invariants.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An integration stage produced a non-finite value (finite escape or overflow).
class OverflowError : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

/// Paths or configs that must share a time grid do not.
class GridMismatchError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Picard iteration hit its iteration cap above tolerance.
class NonConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pi + P drifted from zero in the variance-only case; indicates an integration bug.
class IdentityViolationError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace qmfg
