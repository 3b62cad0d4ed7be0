#pragma once

#include <stdexcept>
#include <string>

namespace rulemt {

// Base class for all toolkit errors. Subclasses exist so callers can
// distinguish failure modes without parsing messages.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- corpus ------------------------------------------------------------

// Malformed record or file; carries the line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// Dangling rule_id, duplicate id, or other cross-record inconsistency.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Unknown enum value (action / difficulty / domain / granularity).
class SchemaError : public Error {
public:
    using Error::Error;
};

// book_string(format=code) on a rule without the requested code form.
class MissingCodeError : public Error {
public:
    using Error::Error;
};

// -- ruleengine --------------------------------------------------------

class ProgramError : public Error {
public:
    using Error::Error;
};

class DirectionMismatch : public Error {
public:
    using Error::Error;
};

// -- metrics -----------------------------------------------------------

class LengthMismatch : public Error {
public:
    using Error::Error;
};

class EmptyReference : public Error {
public:
    using Error::Error;
};

// -- llm ---------------------------------------------------------------

// Network / endpoint failure after all retries were exhausted.
class TransportError : public Error {
public:
    using Error::Error;
};

class AuthError : public Error {
public:
    using Error::Error;
};

// Replay-strict backend asked for a request that is not in the cache.
class CacheMiss : public Error {
public:
    using Error::Error;
};

// Mock profile cannot serve the request (e.g. no program for an instance).
class ProfileError : public Error {
public:
    using Error::Error;
};

// -- retrieval / translator / runner ------------------------------------

class EmptyBook : public Error {
public:
    using Error::Error;
};

// Prompt exceeds the configured context budget; never truncated.
class ContextOverflow : public Error {
public:
    using Error::Error;
};

class NotEnoughRules : public Error {
public:
    using Error::Error;
};

class IgtUnavailable : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// -- rulecraft -----------------------------------------------------------

// LLM output failed structural validation even after the retry.
class GenerationInvalid : public Error {
public:
    using Error::Error;
};

// IGT gloss count does not match the surface token count.
class AlignmentError : public Error {
public:
    using Error::Error;
};

class EmptyGeneration : public Error {
public:
    using Error::Error;
};

}  // namespace rulemt
