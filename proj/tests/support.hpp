#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "rcg/confused_retrieval.hpp"
#include "rcg/core_model.hpp"
#include "rcg/disturbed_db.hpp"
#include "rcg/embedding.hpp"
#include "rcg/mock_llm.hpp"
#include "rcg/rng.hpp"

namespace testsupport {

struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() { return rcg::splitmix64(state); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53 * 2.0 - 1.0; }
};

inline std::string temp_path(const std::string& name) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() / "rcg_tests";
    std::filesystem::create_directories(dir);
    return (dir / (std::to_string(counter++) + "_" + name)).string();
}

inline rcg::DisturbedEntry make_entry(std::string id, std::vector<double> values,
                                      std::string text = "entry text") {
    rcg::DisturbedEntry e;
    e.entry_id = std::move(id);
    e.source_hash = rcg::sha256_hex(e.entry_id);
    e.disturbed_text = std::move(text);
    e.embedding.values = std::move(values);
    return e;
}

inline rcg::DisturbedDatabase make_db(std::vector<rcg::DisturbedEntry> entries,
                                      std::size_t dim) {
    rcg::DisturbedDatabase db;
    db.entries = std::move(entries);
    db.embedder_spec.backend = rcg::EmbedderBackend::ReferenceHash;
    db.embedder_spec.model_name = "reference-hash";
    db.embedder_spec.dim = dim;
    db.prompt_version = "fixture";
    db.manifest.kept = db.entries.size();
    return db;
}

// Database whose entries are embedded comment texts, sharing one embedder.
inline rcg::DisturbedDatabase make_text_db(const std::vector<std::string>& texts,
                                           const rcg::EmbedderSpec& spec,
                                           const std::string& id_prefix = "e") {
    std::vector<rcg::DisturbedEntry> entries;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        char id[24];
        std::snprintf(id, sizeof id, "%s%03zu", id_prefix.c_str(), i);
        entries.push_back(make_entry(id, rcg::embed(spec, texts[i]).values, texts[i]));
    }
    return make_db(std::move(entries), spec.dim);
}

// Brute-force farthest-entry oracle, independent of the retrieval path: its
// own loop, its own accumulation, selection by (distance², then smaller id).
inline std::string oracle_farthest_id(const rcg::DisturbedDatabase& db,
                                      const std::vector<double>& query) {
    std::string best_id;
    double best_d2 = -1.0;
    for (const auto& e : db.entries) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < query.size(); ++k) {
            double diff = e.embedding.values[k] - query[k];
            d2 += diff * diff;
        }
        if (d2 > best_d2 || (d2 == best_d2 && e.entry_id < best_id)) {
            best_d2 = d2;
            best_id = e.entry_id;
        }
    }
    return best_id;
}

// Minimal in-process HTTP server for exercising remote backends.
class TestServer {
  public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    void post(const std::string& path, Handler handler) {
        server_.Post(path, [h = std::move(handler)](const httplib::Request& req,
                                                    httplib::Response& res) { h(req, res); });
    }

    int start() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

    ~TestServer() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

  private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

// Adversarial end-to-end fixture: every profile's comment carries keywords
// for its true attribute values; the database mixes "near" entries carrying
// the same truth keywords with token-heavy "decoy" entries carrying
// conflicting keywords, so a farthest-entry scan always lands on a decoy.
struct AdversarialFixture {
    std::vector<rcg::UserProfile> profiles;
    rcg::DisturbedDatabase db;
    std::vector<rcg::KeywordRule> table;
    rcg::EmbedderSpec spec;
    std::size_t decoy_count = 0;
};

inline AdversarialFixture make_adversarial_fixture(std::size_t n_profiles,
                                                   std::vector<rcg::AttributeKind> attrs,
                                                   std::size_t near_entries = 6,
                                                   std::size_t decoy_entries = 4) {
    AdversarialFixture fx;
    fx.spec.backend = rcg::EmbedderBackend::ReferenceHash;
    fx.spec.dim = 64;
    fx.decoy_count = decoy_entries;

    struct AttrWords {
        rcg::AttributeKind kind;
        std::string truth_kw, truth_value, wrong_kw, wrong_value;
    };
    std::vector<AttrWords> words;
    for (std::size_t a = 0; a < attrs.size(); ++a) {
        std::string n = std::to_string(a);
        words.push_back({attrs[a], "truthkw" + n + "z", "truthval" + n, "wrongkw" + n + "z",
                         "wrongval" + n});
    }

    std::string truth_kws, wrong_kws;
    for (const auto& w : words) {
        truth_kws += w.truth_kw + " ";
        wrong_kws += w.wrong_kw + " ";
        fx.table.push_back({w.truth_kw, w.kind, w.truth_value});
        fx.table.push_back({w.wrong_kw, w.kind, w.wrong_value});
    }

    for (std::size_t i = 0; i < n_profiles; ++i) {
        rcg::UserProfile p;
        p.user_id = "user" + std::to_string(i);
        p.comments.push_back(
            {"c" + std::to_string(i), p.user_id, truth_kws + "filler" + std::to_string(i)});
        for (const auto& w : words) p.ground_truth[w.kind] = w.truth_value;
        fx.profiles.push_back(std::move(p));
    }

    std::vector<std::string> entry_texts;
    for (std::size_t k = 0; k < near_entries; ++k)
        entry_texts.push_back(truth_kws + "friendly" + std::to_string(k));
    for (std::size_t k = 0; k < decoy_entries; ++k) {
        std::string text = wrong_kws;
        for (int j = 0; j < 12; ++j)
            text += "junk" + std::to_string(k) + "x" + std::to_string(j) + " ";
        entry_texts.push_back(text);
    }
    fx.db = make_text_db(entry_texts, fx.spec);
    return fx;
}

inline bool is_decoy_entry(const AdversarialFixture& fx, const std::string& entry_id) {
    // Decoys are the trailing block of entry ids.
    std::size_t first_decoy = fx.db.entries.size() - fx.decoy_count;
    for (std::size_t i = first_decoy; i < fx.db.entries.size(); ++i)
        if (fx.db.entries[i].entry_id == entry_id) return true;
    return false;
}

} // namespace testsupport
