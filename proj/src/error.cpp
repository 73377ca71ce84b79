#include "specrag/error.hpp"

namespace specrag {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedIdentifier: return "MalformedIdentifier";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::DuplicateDocName: return "DuplicateDocName";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::MismatchedDoc: return "MismatchedDoc";
        case ErrorCode::UnknownMedia: return "UnknownMedia";
        case ErrorCode::AlreadyTagged: return "AlreadyTagged";
        case ErrorCode::DuplicateChunkId: return "DuplicateChunkId";
        case ErrorCode::UnknownChunk: return "UnknownChunk";
        case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorCode::ChecksumError: return "ChecksumError";
        case ErrorCode::IndexSealed: return "IndexSealed";
        case ErrorCode::EmptyIndex: return "EmptyIndex";
        case ErrorCode::ContextEmpty: return "ContextEmpty";
        case ErrorCode::EmptySuite: return "EmptySuite";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::ProviderError: return "ProviderError";
    }
    return "Unknown";
}

std::string_view to_string(ProviderFailure kind) {
    switch (kind) {
        case ProviderFailure::Timeout: return "ProviderTimeout";
        case ProviderFailure::Refusal: return "ProviderRefusal";
        case ProviderFailure::Transport: return "TransportError";
        case ProviderFailure::EmptyMedia: return "EmptyMedia";
        case ProviderFailure::BadResponse: return "BadResponse";
        case ProviderFailure::Precondition: return "Precondition";
    }
    return "Unknown";
}

}  // namespace specrag
