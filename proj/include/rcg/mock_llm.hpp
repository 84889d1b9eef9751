#pragma once

#include <map>
#include <string>
#include <vector>

#include "rcg/chat_client.hpp"
#include "rcg/core_model.hpp"

namespace rcg {

// Deterministic paraphraser stand-in for offline database builds. A rewrite
// table maps known source texts to fixed rewrites; anything else falls back
// to a neutral generalization that never echoes the input.
class MockParaphraser : public ChatLlmClient {
  public:
    MockParaphraser() = default;
    explicit MockParaphraser(std::map<std::string, std::string> rewrite_table)
        : rewrite_table_(std::move(rewrite_table)) {}

    std::string send(const std::string& system_prompt,
                     const std::string& user_content) override;

    static MockParaphraser load_table(const std::string& path); // JSON {original: rewrite}

  private:
    std::map<std::string, std::string> rewrite_table_;
};

struct KeywordRule {
    std::string keyword;
    AttributeKind kind;
    std::string value;
};

// Deterministic attacker stand-in: for each target attribute the prediction
// is the value of the first table rule (in table order) whose keyword occurs
// in the query's comment payload; with no match it predicts "unknown".
class MockAttacker {
  public:
    explicit MockAttacker(std::vector<KeywordRule> table) : table_(std::move(table)) {}

    InferenceAnswer infer(const PvaQuery& query) const;

    // JSON array of {"keyword","attribute","value"}.
    static MockAttacker load_table(const std::string& path);
    // Fallback table derived from ground truth: each truth value is its own
    // keyword, so the attacker succeeds exactly when the payload mentions it.
    static MockAttacker from_profiles(const std::vector<UserProfile>& profiles);

    static constexpr const char* kUnknown = "unknown";

  private:
    std::vector<KeywordRule> table_;
};

} // namespace rcg
