#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "rcg/embedding.hpp"
#include "support.hpp"

using nlohmann::json;
using namespace rcg;

namespace {

EmbedderSpec reference_spec(std::size_t dim) {
    EmbedderSpec spec;
    spec.backend = EmbedderBackend::ReferenceHash;
    spec.dim = dim;
    return spec;
}

EmbeddingVector vec(std::vector<double> values) { return {std::move(values)}; }

} // namespace

TEST_CASE("reference embedder is deterministic and pure") {
    auto spec = reference_spec(8);
    EmbeddingVector first = embed(spec, "abc");
    CHECK(first.dim() == 8);
    for (int i = 0; i < 10000; ++i) {
        EmbeddingVector again = embed(spec, "abc");
        REQUIRE(again.values == first.values); // bit-identical
    }
}

TEST_CASE("reference embedder ignores surrounding whitespace and case of separators") {
    auto spec = reference_spec(16);
    CHECK(embed(spec, "abc").values == embed(spec, "abc ").values);
    CHECK(embed(spec, "hello world").values == embed(spec, "  hello,  world!  ").values);
    CHECK(embed(spec, "Hello World").values == embed(spec, "hello world").values);
    CHECK(embed(spec, "alpha beta").values != embed(spec, "alpha gamma").values);
}

TEST_CASE("embed rejects empty text") {
    CHECK_THROWS_AS(embed(reference_spec(4), ""), EmptyText);
    CHECK_THROWS_AS(embed_batch(reference_spec(4), {"ok", ""}), EmptyText);
}

TEST_CASE("l2_distance matches hand-computed values") {
    CHECK(l2_distance(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
    CHECK(l2_distance(vec({0, 0}), vec({3, 4})) == 5.0);
    // (1,1,1) vs (2,3,5): 1 + 4 + 16 = 21
    CHECK(l2_distance(vec({1, 1, 1}), vec({2, 3, 5})) == doctest::Approx(std::sqrt(21.0)));
    CHECK_THROWS_AS(l2_distance(vec({1, 2}), vec({1, 2, 3})), DimensionMismatch);
}

TEST_CASE("l2_distance is symmetric and satisfies the triangle inequality") {
    testsupport::Rng rng(99);
    const std::size_t dim = 24;
    for (int round = 0; round < 500; ++round) {
        EmbeddingVector a, b, c;
        for (std::size_t i = 0; i < dim; ++i) {
            a.values.push_back(rng.uniform() * 10);
            b.values.push_back(rng.uniform() * 10);
            c.values.push_back(rng.uniform() * 10);
        }
        double ab = l2_distance(a, b);
        CHECK(ab == l2_distance(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= l2_distance(a, c) + l2_distance(c, b) + 1e-9 * dim);
    }
}

TEST_CASE("embedder spec strings parse and round-trip") {
    EmbedderSpec ref = parse_embedder_spec("reference-hash:dim=384");
    CHECK(ref.backend == EmbedderBackend::ReferenceHash);
    CHECK(ref.dim == 384);

    EmbedderSpec remote = parse_embedder_spec(
        "remote:endpoint=http://127.0.0.1:9999,model=bge-large-en-v1.5,dim=1024,batch=16");
    CHECK(remote.backend == EmbedderBackend::Remote);
    CHECK(remote.model_name == "bge-large-en-v1.5");
    CHECK(remote.dim == 1024);
    CHECK(remote.batch_size == 16);
    CHECK(parse_embedder_spec(to_string(remote)).endpoint == remote.endpoint);

    CHECK_THROWS_AS(parse_embedder_spec("remote:dim=8,model=m"), Error); // no endpoint
    CHECK_THROWS_AS(parse_embedder_spec("quantum:dim=8"), Error);
    CHECK_THROWS_AS(parse_embedder_spec("reference-hash:dim=0"), Error);
}

TEST_CASE("remote embedder raises a typed error when unreachable") {
    EmbedderSpec spec;
    spec.backend = EmbedderBackend::Remote;
    spec.model_name = "m";
    spec.dim = 4;
    spec.endpoint = "http://127.0.0.1:1"; // nothing listens here
    spec.timeout_seconds = 0.5;
    CHECK_THROWS_AS(embed(spec, "hello"), EmbeddingBackendUnavailable);
}

TEST_CASE("remote embedder batches requests against the wire protocol") {
    auto ref = reference_spec(12);

    testsupport::TestServer server;
    std::atomic<int> requests{0};
    server.post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        ++requests;
        json body = json::parse(req.body);
        REQUIRE(body.contains("model"));
        REQUIRE(body.contains("texts"));
        json vectors = json::array();
        for (const auto& text : body["texts"])
            vectors.push_back(embed(ref, text.get<std::string>()).values);
        res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
    });
    server.start();

    EmbedderSpec spec;
    spec.backend = EmbedderBackend::Remote;
    spec.model_name = "mirror";
    spec.dim = 12;
    spec.endpoint = server.endpoint();
    spec.batch_size = 2;

    std::vector<std::string> texts = {"one", "two", "three", "four", "five"};
    auto vectors = embed_batch(spec, texts);
    REQUIRE(vectors.size() == 5);
    for (std::size_t i = 0; i < texts.size(); ++i)
        CHECK(vectors[i].values == embed(ref, texts[i]).values);
    CHECK(requests.load() == 3); // ceil(5 / 2)

    // A malformed reply surfaces as a backend error.
    testsupport::TestServer bad;
    bad.post("/embed", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"vectors":[[1,2]]})", "application/json"); // wrong count and dim
    });
    bad.start();
    spec.endpoint = bad.endpoint();
    CHECK_THROWS_AS(embed_batch(spec, texts), EmbeddingBackendUnavailable);
}

TEST_CASE("validate_embedding rejects non-finite components") {
    EmbeddingVector v = vec({1.0, 2.0});
    CHECK_NOTHROW(validate_embedding(v, 2));
    CHECK_THROWS_AS(validate_embedding(v, 3), DimensionMismatch);
    v.values[1] = std::nan("");
    CHECK_THROWS_AS(validate_embedding(v), Error);
}
