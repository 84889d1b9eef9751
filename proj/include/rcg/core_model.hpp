#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rcg/errors.hpp"

namespace rcg {

// Closed attribute taxonomy: eight profile attributes plus the two
// medical-QA attributes. Parsing any other tag is an error.
enum class AttributeKind { AGE, SEX, INC, LOC, POB, EDU, OCC, REL, DIS, ADV };

inline constexpr std::size_t kAttributeCount = 10;

std::string_view attribute_tag(AttributeKind kind);
AttributeKind attribute_from_tag(std::string_view tag); // throws UnknownAttributeTag
const std::vector<AttributeKind>& all_attributes();

struct Comment {
    std::string id;      // unique within a corpus
    std::string user_id;
    std::string text;    // nonempty after whitespace trim
};

struct UserProfile {
    std::string user_id;
    std::vector<Comment> comments;
    std::map<AttributeKind, std::string> ground_truth;
};

// An attack query: the adversary's system prompt plus the scraped
// user comments it wants attributes inferred from.
struct PvaQuery {
    std::string system_prompt;
    std::vector<Comment> comments;
    std::set<AttributeKind> target_attributes;
};

struct SlotProvenance {
    std::string original_comment_id;
    std::string replacement_entry_id;
    double distance = 0.0;
};

// The rewritten query: same system prompt, comment slots substituted.
struct DefendedQuery {
    std::string system_prompt; // byte-identical to the source query
    std::vector<Comment> comments;
    std::vector<SlotProvenance> provenance; // one record per slot
};

struct InferenceAnswer {
    std::map<AttributeKind, std::string> predictions;
    std::string raw_response;
};

struct ParseOptions {
    // The gateway relaxes this so ordinary chat traffic without a
    // target_attributes list can pass through.
    bool require_targets = true;
};

// Wire schema: {"system_prompt": str, "comments": [{"id","user_id","text"}],
// "target_attributes": ["AGE", ...]}. Comment id/user_id are optional on the
// wire; missing ids are assigned by position.
PvaQuery parse_pva_query(const nlohmann::json& raw, const ParseOptions& opts = {});
PvaQuery parse_pva_query_text(const std::string& raw_json, const ParseOptions& opts = {});
nlohmann::json to_json(const PvaQuery& query);

// A defended query serializes to the same schema as the query it replaces,
// so it can be forwarded to the same upstream.
nlohmann::json to_json(const DefendedQuery& defended, const std::set<AttributeKind>& target_attributes);
nlohmann::json to_json(const std::vector<SlotProvenance>& provenance);

nlohmann::json to_json(const InferenceAnswer& answer);
// Tolerant parse of a model reply: accepts {"predictions": {...}} or a bare
// tag->value object; anything unparseable predicts "unknown" for each target.
InferenceAnswer parse_inference_answer(const std::string& raw_text,
                                       const std::set<AttributeKind>& targets);

// Lowercase, collapse whitespace, trim edge punctuation. AGE values reduce
// to an integer or integer-range token when the text contains one.
// Idempotent. Throws EmptyValue when nothing survives normalization.
std::string canonicalize_attribute_value(AttributeKind kind, std::string_view raw);

// Equality on canonical values; AGE compares numerically when both sides
// parse as integers.
bool attribute_values_match(AttributeKind kind, std::string_view a, std::string_view b);

// JSONL corpus: one UserProfile object per line.
UserProfile parse_profile(const nlohmann::json& raw);
nlohmann::json to_json(const UserProfile& profile);
std::vector<UserProfile> load_profiles_jsonl(const std::string& path);
void save_profiles_jsonl(const std::vector<UserProfile>& profiles, const std::string& path);

} // namespace rcg
