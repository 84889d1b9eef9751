#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rcg {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Query parsing.
struct MalformedQuery : Error { using Error::Error; };
struct EmptyComments : Error { using Error::Error; };
struct UnknownAttributeTag : Error { using Error::Error; };
struct EmptyValue : Error { using Error::Error; };

// Embedding.
struct EmptyText : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct EmbeddingBackendUnavailable : Error { using Error::Error; };

// Disturbed database.
struct EmptyCorpus : Error { using Error::Error; };
struct ParaphraserUnavailable : Error { using Error::Error; };
struct SchemaVersionMismatch : Error { using Error::Error; };
struct DatabaseUnavailable : Error { using Error::Error; };

struct CorruptRecord : Error {
    CorruptRecord(std::size_t line_number, const std::string& detail)
        : Error("line " + std::to_string(line_number) + ": " + detail), line(line_number) {}
    std::size_t line;
};

// Retrieval.
struct EmptyDatabase : Error { using Error::Error; };

// Gateway / clients.
struct UpstreamUnavailable : Error { using Error::Error; };

// Evaluation.
struct EmptyRecords : Error { using Error::Error; };
struct EmptyEvaluationSet : Error { using Error::Error; };

} // namespace rcg
