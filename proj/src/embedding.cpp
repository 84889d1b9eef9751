#include "rcg/embedding.hpp"

#include <cmath>
#include <charconv>

#include <httplib.h>
#include <json.hpp>

#include "rcg/rng.hpp"

using nlohmann::json;

namespace rcg {

namespace {

bool is_token_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

// Feature-hashed bag of lowercase word tokens with signed hashing, no
// scaling. Whitespace and punctuation only separate tokens, so trailing
// blanks cannot change the output.
EmbeddingVector reference_hash_embed(std::size_t dim, std::string_view text) {
    EmbeddingVector v;
    v.values.assign(dim, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        std::uint64_t h = fnv1a64(token);
        v.values[h % dim] += (h >> 63) ? -1.0 : 1.0;
        token.clear();
    };
    for (char c : text) {
        if (is_token_char(c)) {
            token.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
        } else {
            flush();
        }
    }
    flush();
    return v;
}

void set_timeouts(httplib::Client& cli, double seconds) {
    auto whole = static_cast<time_t>(seconds);
    auto usec = static_cast<time_t>((seconds - static_cast<double>(whole)) * 1e6);
    cli.set_connection_timeout(whole, usec);
    cli.set_read_timeout(whole, usec);
    cli.set_write_timeout(whole, usec);
}

std::vector<EmbeddingVector> remote_embed_chunk(const EmbedderSpec& spec,
                                                std::span<const std::string> texts) {
    httplib::Client cli(spec.endpoint);
    set_timeouts(cli, spec.timeout_seconds);

    json texts_json = json::array();
    for (const auto& t : texts) texts_json.push_back(t);
    json body = {{"model", spec.model_name}, {"texts", std::move(texts_json)}};
    auto res = cli.Post("/embed", body.dump(), "application/json");
    if (!res)
        throw EmbeddingBackendUnavailable("embedding endpoint " + spec.endpoint + ": " +
                                          httplib::to_string(res.error()));
    if (res->status != 200)
        throw EmbeddingBackendUnavailable("embedding endpoint returned status " +
                                          std::to_string(res->status));

    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("vectors") || !doc["vectors"].is_array() ||
        doc["vectors"].size() != texts.size())
        throw EmbeddingBackendUnavailable("embedding response is malformed");

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& row : doc["vectors"]) {
        if (!row.is_array()) throw EmbeddingBackendUnavailable("embedding response is malformed");
        EmbeddingVector v;
        v.values.reserve(row.size());
        for (const auto& x : row) {
            if (!x.is_number()) throw EmbeddingBackendUnavailable("embedding response is malformed");
            v.values.push_back(x.get<double>());
        }
        try {
            validate_embedding(v, spec.dim);
        } catch (const Error& e) {
            throw EmbeddingBackendUnavailable(std::string("embedding response rejected: ") + e.what());
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::size_t parse_size(std::string_view value, const std::string& key) {
    std::size_t out = 0;
    auto rc = std::from_chars(value.data(), value.data() + value.size(), out);
    if (rc.ec != std::errc() || rc.ptr != value.data() + value.size())
        throw Error("embedder spec: bad value for " + key);
    return out;
}

} // namespace

EmbedderSpec parse_embedder_spec(const std::string& text) {
    EmbedderSpec spec;
    std::string_view rest = text;
    std::string_view backend = rest;
    if (auto colon = rest.find(':'); colon != std::string_view::npos) {
        backend = rest.substr(0, colon);
        rest = rest.substr(colon + 1);
    } else {
        rest = {};
    }

    if (backend == "reference-hash") {
        spec.backend = EmbedderBackend::ReferenceHash;
        spec.model_name = "reference-hash";
    } else if (backend == "remote") {
        spec.backend = EmbedderBackend::Remote;
        spec.model_name.clear();
    } else {
        throw Error("embedder spec: unknown backend '" + std::string(backend) + "'");
    }

    while (!rest.empty()) {
        auto comma = rest.find(',');
        std::string_view pair = rest.substr(0, comma);
        rest = (comma == std::string_view::npos) ? std::string_view{} : rest.substr(comma + 1);
        auto eq = pair.find('=');
        if (eq == std::string_view::npos) throw Error("embedder spec: expected key=value");
        std::string key(pair.substr(0, eq));
        std::string_view value = pair.substr(eq + 1);
        if (key == "dim") {
            spec.dim = parse_size(value, key);
        } else if (key == "model") {
            spec.model_name = std::string(value);
        } else if (key == "endpoint") {
            spec.endpoint = std::string(value);
        } else if (key == "batch") {
            spec.batch_size = parse_size(value, key);
        } else if (key == "timeout") {
            spec.timeout_seconds = std::stod(std::string(value));
        } else {
            throw Error("embedder spec: unknown key '" + key + "'");
        }
    }

    if (spec.dim == 0) throw Error("embedder spec: dim must be positive");
    if (spec.batch_size == 0) throw Error("embedder spec: batch must be positive");
    if (spec.backend == EmbedderBackend::Remote) {
        if (spec.endpoint.empty()) throw Error("embedder spec: remote backend requires endpoint");
        if (spec.model_name.empty()) throw Error("embedder spec: remote backend requires model");
    }
    return spec;
}

std::string to_string(const EmbedderSpec& spec) {
    std::string out =
        spec.backend == EmbedderBackend::ReferenceHash ? "reference-hash" : "remote";
    out += ":dim=" + std::to_string(spec.dim);
    out += ",model=" + spec.model_name;
    if (!spec.endpoint.empty()) out += ",endpoint=" + spec.endpoint;
    return out;
}

EmbeddingVector embed(const EmbedderSpec& spec, std::string_view text) {
    if (text.empty()) throw EmptyText("cannot embed empty text");
    if (spec.backend == EmbedderBackend::ReferenceHash)
        return reference_hash_embed(spec.dim, text);
    std::vector<std::string> one{std::string(text)};
    return remote_embed_chunk(spec, one).front();
}

std::vector<EmbeddingVector> embed_batch(const EmbedderSpec& spec,
                                         const std::vector<std::string>& texts) {
    for (const auto& t : texts)
        if (t.empty()) throw EmptyText("cannot embed empty text");

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    if (spec.backend == EmbedderBackend::ReferenceHash) {
        for (const auto& t : texts) out.push_back(reference_hash_embed(spec.dim, t));
        return out;
    }
    for (std::size_t begin = 0; begin < texts.size(); begin += spec.batch_size) {
        std::size_t count = std::min(spec.batch_size, texts.size() - begin);
        auto chunk = remote_embed_chunk(spec, {texts.data() + begin, count});
        for (auto& v : chunk) out.push_back(std::move(v));
    }
    return out;
}

double l2_distance_squared(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double l2_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw DimensionMismatch("l2_distance: dim " + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
    return std::sqrt(l2_distance_squared(a.values, b.values));
}

void validate_embedding(const EmbeddingVector& v, std::size_t expected_dim) {
    if (expected_dim != 0 && v.dim() != expected_dim)
        throw DimensionMismatch("embedding dim " + std::to_string(v.dim()) + ", expected " +
                                std::to_string(expected_dim));
    for (double x : v.values) {
        if (!std::isfinite(x)) throw Error("embedding contains a non-finite component");
    }
}

} // namespace rcg
