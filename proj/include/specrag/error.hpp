#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace specrag {

enum class ErrorCode {
    MalformedIdentifier,
    ParseError,
    DuplicateDocName,
    IoError,
    MismatchedDoc,
    UnknownMedia,
    AlreadyTagged,
    DuplicateChunkId,
    UnknownChunk,
    SchemaVersionMismatch,
    ChecksumError,
    IndexSealed,
    EmptyIndex,
    ContextEmpty,
    EmptySuite,
    InvalidArgument,
    ConfigError,
    ProviderError,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure surfaced by the library. The code is the
/// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

enum class ProviderFailure { Timeout, Refusal, Transport, EmptyMedia, BadResponse, Precondition };

std::string_view to_string(ProviderFailure kind);

class ProviderError : public Error {
  public:
    ProviderError(ProviderFailure kind, const std::string& message)
        : Error(ErrorCode::ProviderError, std::string(to_string(kind)) + ": " + message),
          kind_(kind) {}

    ProviderFailure kind() const noexcept { return kind_; }

    // Timeouts, refusals and transport failures may succeed on a second attempt.
    bool retryable() const noexcept {
        return kind_ == ProviderFailure::Timeout || kind_ == ProviderFailure::Refusal ||
               kind_ == ProviderFailure::Transport;
    }

  private:
    ProviderFailure kind_;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw Error(ErrorCode::InvalidArgument, message);
    }
}

}  // namespace specrag
