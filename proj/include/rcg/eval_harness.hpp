#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcg/chat_client.hpp"
#include "rcg/confused_retrieval.hpp"
#include "rcg/core_model.hpp"
#include "rcg/disturbed_db.hpp"
#include "rcg/mock_llm.hpp"

namespace rcg {

// One scored inference outcome. A profile is attacked with one query that
// covers all of its target attributes; the query's wall-clock latency is
// split evenly across its records, so summing record latencies recovers the
// total query time exactly.
struct AttackRecord {
    std::string user_id;
    AttributeKind attribute = AttributeKind::AGE;
    std::string predicted; // canonical
    std::string truth;     // canonical
    bool correct = false;
    bool failed = false; // transport failure; excluded from every total
    double latency_seconds = 0.0;
};

enum class DefenseMode { None, Rcg, RandomEntry };
DefenseMode defense_from(std::string_view name); // none | rcg | random
std::string_view defense_name(DefenseMode mode);

struct EvalConfig {
    DefenseMode defense = DefenseMode::None;
    // Strategy for DefenseMode::Rcg; RandomEntry derives a per-profile seed
    // from random_seed so draws differ across profiles but stay reproducible.
    RetrievalStrategy strategy = RetrievalStrategy::most_irrelevant();
    std::uint64_t random_seed = 1;
    EmbedderSpec embedder;
    const DisturbedDatabase* database = nullptr; // required unless defense == None
    std::string model_label = "mock";
    std::string database_label;
};

struct ConfigFingerprint {
    std::string embedder;
    std::string strategy;
    std::string database;
    std::string model;
    std::string defense;
};

struct TimeCost {
    double total_seconds = 0.0;
    double seconds_per_batch = 0.0;
    double mean_seconds = 0.0;
    double p95_seconds = 0.0;
    std::size_t batch = 100;
    std::size_t queries = 0;
};

struct AttributeScore {
    std::uint64_t total = 0;
    std::uint64_t correct = 0;
    double asr = 0.0;
};

struct AsrReport {
    std::map<AttributeKind, AttributeScore> per_attribute;
    double average = 0.0; // overall correct / overall total
    std::uint64_t n_total = 0;
    std::uint64_t n_correct = 0;
    std::uint64_t n_excluded = 0; // failed records
    TimeCost timing;
    ConfigFingerprint fingerprint;
};

// Versioned attack prompt: lists the target attributes and asks for one best
// guess each, as a JSON object.
std::string attack_system_prompt(const std::set<AttributeKind>& targets);
extern const char* const kAttackPromptVersion;

// Runs one attack query per profile (targets = the profile's ground-truth
// keys), applying the configured defense first. Transport failures mark the
// profile's records failed and the run continues.
std::vector<AttackRecord> run_attack(const std::vector<UserProfile>& profiles,
                                     const MockAttacker& attacker, const EvalConfig& config);
std::vector<AttackRecord> run_attack(const std::vector<UserProfile>& profiles,
                                     ChatLlmClient& model, const EvalConfig& config);

AsrReport score_asr(const std::vector<AttackRecord>& records); // throws EmptyRecords
AsrReport score_asr(const std::vector<AttackRecord>& records, const ConfigFingerprint& fp);

// Latency summary scaled to a fixed batch of queries. Queries are grouped by
// user_id; each query's latency is the sum of its records' latencies.
TimeCost time_cost(const std::vector<AttackRecord>& records, std::size_t batch = 100);

ConfigFingerprint fingerprint_of(const EvalConfig& config);

nlohmann::json report_json(const AsrReport& report);
// One table row per report, columns = attributes + Average.
std::string report_markdown(std::span<const AsrReport> reports);
std::string records_csv(const std::vector<AttackRecord>& records);

} // namespace rcg
