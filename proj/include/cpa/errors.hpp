#pragma once

#include <stdexcept>
#include <string>

namespace cpa {

/// Corrupt or ill-formed input data. The offending data point can be skipped
/// and logged; it does not have to abort a batch run.
class MalformedInputError : public std::runtime_error {
public:
    explicit MalformedInputError(const std::string& what) : std::runtime_error(what) {}
};

/// File could not be read or written, or its contents are unreadable.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// A persisted file was produced by an incompatible schema version.
class SchemaVersionError : public std::runtime_error {
public:
    explicit SchemaVersionError(const std::string& what) : std::runtime_error(what) {}
};

/// Nothing to build: the corpus is empty or contains no usable tables.
class EmptyCorpusError : public std::runtime_error {
public:
    explicit EmptyCorpusError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad configuration: flags, templates, backend settings.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Network-level failure talking to the LLM endpoint, after retries.
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

/// The LLM endpoint rejected the request (4xx). Treated as a configuration
/// problem that aborts the run rather than a per-column failure.
class BackendRefusalError : public std::runtime_error {
public:
    explicit BackendRefusalError(const std::string& what) : std::runtime_error(what) {}
};

/// A caller violated a documented precondition.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace cpa
