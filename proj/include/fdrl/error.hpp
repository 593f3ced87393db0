#pragma once

#include <stdexcept>
#include <string>

namespace fdrl {

/// An argument violated an operation's precondition.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A file could not be parsed; the message carries file, line and field context.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Loaded data is well-formed but breaks a domain invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Weight vectors or networks whose layouts do not match.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An operation was called in a state that does not allow it.
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class SplitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A federated round could not complete.
class FederationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fdrl
