#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rcg/chat_client.hpp"
#include "rcg/core_model.hpp"
#include "rcg/embedding.hpp"

namespace rcg {

// Paraphrasing instruction with a single {comment} placeholder.
struct ParaphrasePrompt {
    std::string template_text;
    std::string version;

    std::string render(std::string_view comment) const;
    void validate() const; // exactly one placeholder

    // File format: optional first line "version: <v>", remainder is the
    // template.
    static ParaphrasePrompt load_file(const std::string& path);
    static ParaphrasePrompt default_prompt();
};

// One paraphrased comment. The original text is hashed and discarded during
// the build; only the digest survives.
struct DisturbedEntry {
    std::string entry_id;
    std::string source_hash;
    std::string disturbed_text;
    EmbeddingVector embedding;
};

struct BuildManifest {
    std::uint64_t kept = 0;
    std::uint64_t dropped = 0;
    std::int64_t built_at_unix = 0;
};

struct DisturbedDatabase {
    std::vector<DisturbedEntry> entries;
    EmbedderSpec embedder_spec;
    std::string prompt_version;
    BuildManifest manifest;
};

struct BuildOptions {
    int max_in_flight = 8; // parallel paraphrase cap
    // Fixed clock for reproducible builds; defaults to the current time.
    std::optional<std::int64_t> build_time;
    bool log_drops = true; // drop reasons go to stderr
};

// Paraphrases every original, embeds the rewrites, and snapshots the result.
// Rewrites that come back empty or identical to their source are retried
// once, then dropped; per-item transport failures likewise retry then drop.
// Throws ParaphraserUnavailable only when every item failed on transport.
DisturbedDatabase build_database(const std::vector<Comment>& originals,
                                 const ParaphrasePrompt& prompt, ChatLlmClient& paraphraser,
                                 const EmbedderSpec& embedder, const BuildOptions& options = {});

// Versioned JSONL: header line {"schema":1,"dim":...,"model":...,
// "prompt_version":...}, then one entry per line. Embeddings round-trip
// bit-exactly through the decimal encoding.
void save_database(const DisturbedDatabase& db, const std::string& path);
DisturbedDatabase load_database(const std::string& path);

std::string sha256_hex(std::string_view data);

} // namespace rcg
