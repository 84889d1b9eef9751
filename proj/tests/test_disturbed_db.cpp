#include <doctest.h>

#include <atomic>
#include <fstream>

#include "rcg/confused_retrieval.hpp"
#include "rcg/disturbed_db.hpp"
#include "rcg/mock_llm.hpp"
#include "support.hpp"

using namespace rcg;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

EmbedderSpec reference_spec(std::size_t dim) {
    EmbedderSpec spec;
    spec.dim = dim;
    return spec;
}

// Echoes the source comment back; with a bare "{comment}" template that is
// indistinguishable from a refusal to paraphrase.
class EchoParaphraser : public ChatLlmClient {
  public:
    std::string send(const std::string&, const std::string& user_content) override {
        ++calls;
        return user_content;
    }
    std::atomic<int> calls{0};
};

class FailingParaphraser : public ChatLlmClient {
  public:
    explicit FailingParaphraser(std::vector<std::string> fail_for = {})
        : fail_for_(std::move(fail_for)) {}
    std::string send(const std::string&, const std::string& user_content) override {
        for (const auto& needle : fail_for_)
            if (user_content.find(needle) != std::string::npos)
                throw UpstreamUnavailable("connection refused");
        if (fail_for_.empty()) throw UpstreamUnavailable("connection refused");
        return "A calm note about something else.";
    }

  private:
    std::vector<std::string> fail_for_;
};

} // namespace

TEST_CASE("paraphrase prompt demands exactly one placeholder") {
    ParaphrasePrompt ok{"Rewrite: {comment}", "v"};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.render("hi") == "Rewrite: hi");

    CHECK_THROWS_AS((ParaphrasePrompt{"no placeholder", "v"}.validate()), Error);
    CHECK_THROWS_AS((ParaphrasePrompt{"{comment} and {comment}", "v"}.validate()), Error);
    CHECK_NOTHROW(ParaphrasePrompt::default_prompt().validate());
}

TEST_CASE("builder keeps table-driven rewrites and hashes away the source") {
    const std::string original = "My next-door virtuoso thinks Beethoven's symphonies are great";
    const std::string rewritten = "An enthusiast enjoys activities";

    MockParaphraser paraphraser({{original, rewritten}});
    std::vector<Comment> originals = {{"c1", "u1", original}};
    DisturbedDatabase db = build_database(originals, ParaphrasePrompt::default_prompt(),
                                          paraphraser, reference_spec(32));

    REQUIRE(db.entries.size() == 1);
    CHECK(db.entries[0].disturbed_text == rewritten);
    CHECK(db.entries[0].source_hash == sha256_hex(original));
    CHECK(db.entries[0].embedding.dim() == 32);
    CHECK(db.manifest.kept == 1);
    CHECK(db.manifest.dropped == 0);
}

TEST_CASE("verbatim echoes are retried once and then dropped") {
    EchoParaphraser echo;
    ParaphrasePrompt bare{"{comment}", "bare/v1"};
    std::vector<Comment> originals = {{"c1", "u1", "some comment text"}};

    BuildOptions options;
    options.max_in_flight = 1;
    options.log_drops = false;
    DisturbedDatabase db = build_database(originals, bare, echo, reference_spec(8), options);
    CHECK(db.entries.empty());
    CHECK(db.manifest.dropped == 1);
    CHECK(echo.calls.load() == 2); // one attempt plus one retry
}

TEST_CASE("builder error taxonomy") {
    MockParaphraser paraphraser;
    CHECK_THROWS_AS(build_database({}, ParaphrasePrompt::default_prompt(), paraphraser,
                                   reference_spec(8)),
                    EmptyCorpus);

    FailingParaphraser always_down;
    std::vector<Comment> originals = {{"c1", "u1", "alpha"}, {"c2", "u1", "beta"}};
    BuildOptions quiet;
    quiet.log_drops = false;
    CHECK_THROWS_AS(build_database(originals, ParaphrasePrompt::default_prompt(), always_down,
                                   reference_spec(8), quiet),
                    ParaphraserUnavailable);

    // A partial outage drops the failing item but keeps the rest.
    FailingParaphraser partial({"alpha"});
    DisturbedDatabase db = build_database(originals, ParaphrasePrompt::default_prompt(), partial,
                                          reference_spec(8), quiet);
    CHECK(db.manifest.kept == 1);
    CHECK(db.manifest.dropped == 1);
}

TEST_CASE("save/load round-trips the database exactly") {
    MockParaphraser paraphraser;
    std::vector<Comment> originals = {{"c1", "u1", "first original"},
                                      {"c2", "u1", "second original"},
                                      {"c3", "u2", "third original"}};
    BuildOptions options;
    options.build_time = 1700000000;
    DisturbedDatabase db = build_database(originals, ParaphrasePrompt::default_prompt(),
                                          paraphraser, reference_spec(16), options);
    REQUIRE(db.entries.size() == 3);

    std::string path = testsupport::temp_path("db.jsonl");
    save_database(db, path);
    DisturbedDatabase loaded = load_database(path);

    CHECK(loaded.embedder_spec.dim == db.embedder_spec.dim);
    CHECK(loaded.embedder_spec.model_name == db.embedder_spec.model_name);
    CHECK(loaded.prompt_version == db.prompt_version);
    CHECK(loaded.manifest.kept == db.manifest.kept);
    CHECK(loaded.manifest.dropped == db.manifest.dropped);
    CHECK(loaded.manifest.built_at_unix == db.manifest.built_at_unix);
    REQUIRE(loaded.entries.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(loaded.entries[i].entry_id == db.entries[i].entry_id);
        CHECK(loaded.entries[i].source_hash == db.entries[i].source_hash);
        CHECK(loaded.entries[i].disturbed_text == db.entries[i].disturbed_text);
        CHECK(loaded.entries[i].embedding.values == db.entries[i].embedding.values); // bit-exact
    }

    // Saving the loaded copy reproduces the file byte for byte.
    std::string second_path = testsupport::temp_path("db2.jsonl");
    save_database(loaded, second_path);
    CHECK(slurp(path) == slurp(second_path));
}

TEST_CASE("corrupt and mismatched files raise typed errors with line numbers") {
    MockParaphraser paraphraser;
    std::vector<Comment> originals = {{"c1", "u1", "first"}, {"c2", "u1", "second"},
                                      {"c3", "u1", "third"}};
    DisturbedDatabase db = build_database(originals, ParaphrasePrompt::default_prompt(),
                                          paraphraser, reference_spec(8));
    std::string path = testsupport::temp_path("db.jsonl");
    save_database(db, path);

    // Truncate the last line mid-record.
    std::string content = slurp(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content.substr(0, content.size() - 10);
    out.close();
    try {
        load_database(path);
        FAIL("expected CorruptRecord");
    } catch (const CorruptRecord& e) {
        CHECK(e.line == 4); // header + three entries
    }

    std::string bad_schema = testsupport::temp_path("schema.jsonl");
    std::ofstream s(bad_schema, std::ios::binary);
    s << R"({"schema":99,"dim":8,"model":"m","prompt_version":"v"})" << "\n";
    s.close();
    CHECK_THROWS_AS(load_database(bad_schema), SchemaVersionMismatch);

    CHECK_THROWS_AS(load_database(testsupport::temp_path("missing.jsonl")),
                    DatabaseUnavailable);
}

TEST_CASE("no original text survives into the serialized database") {
    const std::vector<std::string> secrets = {
        "zebrauniquephrase one of a kind", "quixotic flamingo sentence",
        "peculiar narwhal testimony"};
    MockParaphraser paraphraser; // fallback generalizations only
    std::vector<Comment> originals;
    for (std::size_t i = 0; i < secrets.size(); ++i)
        originals.push_back({"c" + std::to_string(i), "u1", secrets[i]});

    DisturbedDatabase db = build_database(originals, ParaphrasePrompt::default_prompt(),
                                          paraphraser, reference_spec(8));
    REQUIRE(db.entries.size() == secrets.size());

    std::string path = testsupport::temp_path("private.jsonl");
    save_database(db, path);
    std::string file = slurp(path);
    for (const auto& secret : secrets) {
        CHECK(file.find(secret) == std::string::npos);
        CHECK(file.find(sha256_hex(secret)) != std::string::npos); // digest only
    }
}

TEST_CASE("builds are byte-reproducible under a fixed clock") {
    MockParaphraser paraphraser;
    std::vector<Comment> originals;
    for (int i = 0; i < 12; ++i)
        originals.push_back({"c" + std::to_string(i), "u", "original text " + std::to_string(i)});

    BuildOptions options;
    options.build_time = 42;
    options.max_in_flight = 4;

    std::string a = testsupport::temp_path("a.jsonl");
    std::string b = testsupport::temp_path("b.jsonl");
    save_database(build_database(originals, ParaphrasePrompt::default_prompt(), paraphraser,
                                 reference_spec(24), options),
                  a);
    save_database(build_database(originals, ParaphrasePrompt::default_prompt(), paraphraser,
                                 reference_spec(24), options),
                  b);
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("a database built at one dim rejects queries at another") {
    MockParaphraser paraphraser;
    std::vector<Comment> originals = {{"c1", "u1", "something"}};
    DisturbedDatabase db = build_database(originals, ParaphrasePrompt::default_prompt(),
                                          paraphraser, reference_spec(384));
    std::string path = testsupport::temp_path("dim.jsonl");
    save_database(db, path);
    DisturbedDatabase loaded = load_database(path);

    EmbeddingVector wrong;
    wrong.values.assign(1024, 0.0);
    CHECK_THROWS_AS(most_irrelevant_probe(wrong, loaded), DimensionMismatch);
}
