#pragma once

#include <stdexcept>
#include <string>

namespace memsync {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad caller input: malformed sequences, mismatched alphabets, count mismatches.
class InputError : public Error {
public:
    using Error::Error;
};

/// A matrix or parameter set that violates stochasticity or range constraints.
class ValidationError : public InputError {
public:
    using InputError::InputError;
};

/// Dataset file could not be parsed. Carries the 1-based line number when known.
class IngestError : public InputError {
public:
    IngestError(const std::string& what, std::size_t line = 0)
        : InputError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// File could not be opened, read or written. The message names the path.
class IoError : public InputError {
public:
    using InputError::InputError;
};

/// Failures while running an analysis step (as opposed to bad input).
class AnalysisError : public Error {
public:
    using Error::Error;
};

class SimulationError : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

class FitError : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

class ModelError : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

class GofError : public AnalysisError {
public:
    using AnalysisError::AnalysisError;
};

}  // namespace memsync
