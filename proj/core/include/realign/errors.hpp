// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace realign {

/// Caller violated a documented precondition.
class UsageError : public std::logic_error {
public:
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

/// Network-level failure after all retries were exhausted (or a non-retryable
/// HTTP status).
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

/// The remote endpoint answered, but the body did not match the documented shape.
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

/// An image attachment could not be encoded for transport.
class ImageEncodingError : public std::runtime_error {
public:
    explicit ImageEncodingError(const std::string& what) : std::runtime_error(what) {}
};

/// An image file could not be read or decoded.
class UnreadableImage : public std::runtime_error {
public:
    explicit UnreadableImage(const std::string& what) : std::runtime_error(what) {}
};

/// A template placeholder had no binding. `placeholder()` names it.
class MissingBinding : public std::runtime_error {
public:
    explicit MissingBinding(const std::string& placeholder)
        : std::runtime_error("missing binding: " + placeholder), placeholder_(placeholder) {}
    const std::string& placeholder() const { return placeholder_; }

private:
    std::string placeholder_;
};

class UnknownTemplate : public std::runtime_error {
public:
    explicit UnknownTemplate(const std::string& id)
        : std::runtime_error("unknown template: " + id) {}
};

/// Planner output did not match the plan grammar.
class UnparseablePlan : public std::runtime_error {
public:
    explicit UnparseablePlan(const std::string& what) : std::runtime_error(what) {}
};

/// Reflector output carried no recognizable verdict.
class UnparseableReflection : public std::runtime_error {
public:
    explicit UnparseableReflection(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, long line = -1)
        : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_ = -1;
};

/// Data failed semantic validation (duplicate ids, invariant violations, ...).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A stage stopped at a checkpoint boundary after an interrupt request.
/// Completed work is already flushed; rerunning resumes where it left off.
class Interrupted : public std::runtime_error {
public:
    Interrupted() : std::runtime_error("interrupted") {}
};

} // namespace realign
