#include "rcg/disturbed_db.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <unordered_set>

#include <json.hpp>
#include <openssl/evp.h>

#ifdef _OPENMP
#include <omp.h>
#endif

using nlohmann::json;

namespace rcg {

namespace {

constexpr int kSchemaVersion = 1;
constexpr std::string_view kPlaceholder = "{comment}";

constexpr const char* kDefaultTemplate =
    "Rewrite the following comment so that any cues about age, sex, income, "
    "geographic location, place of birth, education, occupation, relationship "
    "status, or illness are removed or generalized. Keep the rewrite fluent and "
    "natural, and reply with only the rewritten comment.\n\nComment: {comment}";

std::string trim_copy(std::string_view s) {
    std::size_t b = 0, e = s.size();
    auto blank = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (b < e && blank(s[b])) ++b;
    while (e > b && blank(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string backend_name(EmbedderBackend backend) {
    return backend == EmbedderBackend::ReferenceHash ? "reference-hash" : "remote";
}

EmbedderBackend backend_from_name(const std::string& name) {
    if (name == "reference-hash") return EmbedderBackend::ReferenceHash;
    if (name == "remote") return EmbedderBackend::Remote;
    throw Error("unknown embedder backend in database header: " + name);
}

struct ParaphraseOutcome {
    bool kept = false;
    bool transport_failed = false;
    std::string text;
    std::string reason;
};

ParaphraseOutcome paraphrase_one(ChatLlmClient& paraphraser, const ParaphrasePrompt& prompt,
                                 const Comment& original) {
    ParaphraseOutcome out;
    const std::string rendered = prompt.render(original.text);
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string reply;
        try {
            reply = trim_copy(paraphraser.send("", rendered));
        } catch (const UpstreamUnavailable& e) {
            out.transport_failed = true;
            out.reason = e.what();
            continue;
        }
        out.transport_failed = false;
        if (reply.empty()) {
            out.reason = "paraphrase came back empty";
            continue;
        }
        if (reply == original.text) {
            out.reason = "paraphrase identical to the source";
            continue;
        }
        out.kept = true;
        out.text = std::move(reply);
        return out;
    }
    return out;
}

} // namespace

std::string ParaphrasePrompt::render(std::string_view comment) const {
    validate();
    auto pos = template_text.find(kPlaceholder);
    std::string out = template_text;
    out.replace(pos, kPlaceholder.size(), comment);
    return out;
}

void ParaphrasePrompt::validate() const {
    auto first = template_text.find(kPlaceholder);
    if (first == std::string::npos)
        throw Error("paraphrase template must contain " + std::string(kPlaceholder));
    if (template_text.find(kPlaceholder, first + 1) != std::string::npos)
        throw Error("paraphrase template must contain " + std::string(kPlaceholder) +
                    " exactly once");
}

ParaphrasePrompt ParaphrasePrompt::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open paraphrase prompt: " + path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    ParaphrasePrompt prompt;
    prompt.version = "unversioned";
    constexpr std::string_view kVersionKey = "version:";
    if (content.rfind(kVersionKey, 0) == 0) {
        auto eol = content.find('\n');
        std::string head = content.substr(kVersionKey.size(),
                                          eol == std::string::npos ? std::string::npos
                                                                   : eol - kVersionKey.size());
        prompt.version = trim_copy(head);
        content = eol == std::string::npos ? std::string{} : content.substr(eol + 1);
    }
    prompt.template_text = trim_copy(content);
    prompt.validate();
    return prompt;
}

ParaphrasePrompt ParaphrasePrompt::default_prompt() {
    return {kDefaultTemplate, "p_par/v1"};
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

DisturbedDatabase build_database(const std::vector<Comment>& originals,
                                 const ParaphrasePrompt& prompt, ChatLlmClient& paraphraser,
                                 const EmbedderSpec& embedder, const BuildOptions& options) {
    if (originals.empty()) throw EmptyCorpus("no original comments to paraphrase");
    prompt.validate();

    const std::size_t n = originals.size();
    std::vector<ParaphraseOutcome> outcomes(n);
    const int threads = std::clamp(options.max_in_flight, 1, 64);

#ifdef _OPENMP
    #pragma omp parallel for num_threads(threads) schedule(dynamic)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        outcomes[static_cast<std::size_t>(i)] =
            paraphrase_one(paraphraser, prompt, originals[static_cast<std::size_t>(i)]);
    }

    std::size_t transport_failures = 0;
    std::vector<std::size_t> kept_indices;
    for (std::size_t i = 0; i < n; ++i) {
        if (outcomes[i].kept) {
            kept_indices.push_back(i);
        } else {
            if (outcomes[i].transport_failed) ++transport_failures;
            if (options.log_drops)
                std::cerr << "[build-db] dropped comment id=" << originals[i].id << ": "
                          << outcomes[i].reason << '\n';
        }
    }
    if (kept_indices.empty() && transport_failures == n)
        throw ParaphraserUnavailable("paraphraser failed for every comment: " +
                                     outcomes.front().reason);

    std::vector<std::string> texts;
    texts.reserve(kept_indices.size());
    for (std::size_t i : kept_indices) texts.push_back(outcomes[i].text);
    std::vector<EmbeddingVector> embeddings = embed_batch(embedder, texts);

    DisturbedDatabase db;
    db.embedder_spec = embedder;
    db.prompt_version = prompt.version;
    db.entries.reserve(kept_indices.size());
    for (std::size_t k = 0; k < kept_indices.size(); ++k) {
        const Comment& original = originals[kept_indices[k]];
        char id[24];
        std::snprintf(id, sizeof id, "e%06zu", k);
        db.entries.push_back({id, sha256_hex(original.text), std::move(texts[k]),
                              std::move(embeddings[k])});
    }
    db.manifest.kept = db.entries.size();
    db.manifest.dropped = n - db.entries.size();
    db.manifest.built_at_unix =
        options.build_time.value_or(static_cast<std::int64_t>(std::time(nullptr)));
    return db;
}

void save_database(const DisturbedDatabase& db, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write database file: " + path);

    json header = {{"schema", kSchemaVersion},
                   {"dim", db.embedder_spec.dim},
                   {"model", db.embedder_spec.model_name},
                   {"backend", backend_name(db.embedder_spec.backend)},
                   {"endpoint", db.embedder_spec.endpoint},
                   {"prompt_version", db.prompt_version},
                   {"manifest",
                    {{"kept", db.manifest.kept},
                     {"dropped", db.manifest.dropped},
                     {"built_at_unix", db.manifest.built_at_unix}}}};
    out << header.dump() << '\n';

    for (const auto& e : db.entries) {
        json line = {{"entry_id", e.entry_id},
                     {"source_hash", e.source_hash},
                     {"disturbed_text", e.disturbed_text},
                     {"embedding", e.embedding.values}};
        out << line.dump() << '\n';
    }
    if (!out) throw Error("write failed: " + path);
}

DisturbedDatabase load_database(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatabaseUnavailable("cannot open database file: " + path);

    std::string line;
    std::size_t line_number = 0;

    if (!std::getline(in, line)) throw CorruptRecord(1, "database file is empty");
    ++line_number;
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object())
        throw CorruptRecord(1, "header line is not a JSON object");
    if (!header.contains("schema") || !header["schema"].is_number_integer())
        throw SchemaVersionMismatch("database header has no schema version");
    if (header["schema"].get<int>() != kSchemaVersion)
        throw SchemaVersionMismatch("unsupported schema version " +
                                    std::to_string(header["schema"].get<int>()));

    DisturbedDatabase db;
    try {
        db.embedder_spec.dim = header.at("dim").get<std::size_t>();
        db.embedder_spec.model_name = header.at("model").get<std::string>();
        db.embedder_spec.backend = backend_from_name(header.value("backend", "reference-hash"));
        db.embedder_spec.endpoint = header.value("endpoint", "");
        db.prompt_version = header.value("prompt_version", "");
        if (header.contains("manifest")) {
            const auto& m = header["manifest"];
            db.manifest.kept = m.value("kept", std::uint64_t{0});
            db.manifest.dropped = m.value("dropped", std::uint64_t{0});
            db.manifest.built_at_unix = m.value("built_at_unix", std::int64_t{0});
        }
    } catch (const json::exception& e) {
        throw CorruptRecord(1, std::string("bad header: ") + e.what());
    }
    if (db.embedder_spec.dim == 0) throw CorruptRecord(1, "header dim must be positive");

    std::unordered_set<std::string> seen_ids;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object())
            throw CorruptRecord(line_number, "entry line is not a JSON object");

        DisturbedEntry e;
        try {
            e.entry_id = doc.at("entry_id").get<std::string>();
            e.source_hash = doc.at("source_hash").get<std::string>();
            e.disturbed_text = doc.at("disturbed_text").get<std::string>();
            e.embedding.values = doc.at("embedding").get<std::vector<double>>();
        } catch (const json::exception& err) {
            throw CorruptRecord(line_number, std::string("bad entry: ") + err.what());
        }
        if (e.entry_id.empty()) throw CorruptRecord(line_number, "entry_id is empty");
        if (!seen_ids.insert(e.entry_id).second)
            throw CorruptRecord(line_number, "duplicate entry_id: " + e.entry_id);
        if (trim_copy(e.disturbed_text).empty())
            throw CorruptRecord(line_number, "disturbed_text is empty");
        try {
            validate_embedding(e.embedding, db.embedder_spec.dim);
        } catch (const Error& err) {
            throw CorruptRecord(line_number, err.what());
        }
        db.entries.push_back(std::move(e));
    }
    return db;
}

} // namespace rcg
