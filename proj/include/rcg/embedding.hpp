#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rcg/errors.hpp"

namespace rcg {

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dim() const { return values.size(); }
};

enum class EmbedderBackend { ReferenceHash, Remote };

struct EmbedderSpec {
    EmbedderBackend backend = EmbedderBackend::ReferenceHash;
    std::string model_name = "reference-hash";
    std::size_t dim = 256;
    std::string endpoint;        // required for the remote backend
    std::size_t batch_size = 32; // remote request batching cap
    double timeout_seconds = 30.0;
};

// Compact spec syntax: "reference-hash:dim=256" or
// "remote:endpoint=http://host:port,model=bge-large-en-v1.5,dim=1024".
EmbedderSpec parse_embedder_spec(const std::string& text);
std::string to_string(const EmbedderSpec& spec);

// Deterministic for a fixed (spec, text). Throws EmptyText on empty input and
// EmbeddingBackendUnavailable when the remote service cannot be reached.
EmbeddingVector embed(const EmbedderSpec& spec, std::string_view text);
std::vector<EmbeddingVector> embed_batch(const EmbedderSpec& spec,
                                         const std::vector<std::string>& texts);

// Plain Euclidean distance; embeddings are deliberately not normalized first.
double l2_distance(const EmbeddingVector& a, const EmbeddingVector& b);
double l2_distance_squared(std::span<const double> a, std::span<const double> b);

// Rejects NaN/infinite components and, when expected_dim > 0, wrong sizes.
void validate_embedding(const EmbeddingVector& v, std::size_t expected_dim = 0);

} // namespace rcg
