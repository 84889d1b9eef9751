#include "rcg/mock_llm.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "rcg/rng.hpp"

using nlohmann::json;

namespace rcg {

std::string MockParaphraser::send(const std::string& /*system_prompt*/,
                                  const std::string& user_content) {
    for (const auto& [original, rewrite] : rewrite_table_) {
        if (user_content.find(original) != std::string::npos) return rewrite;
    }
    // Neutral fallback keyed by a hash so distinct inputs stay distinct while
    // no byte of the source text survives.
    char tag[16];
    std::snprintf(tag, sizeof tag, "%04x", static_cast<unsigned>(fnv1a64(user_content) & 0xffff));
    return std::string("A person shares a general remark, reference ") + tag + ".";
}

MockParaphraser MockParaphraser::load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open rewrite table: " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw Error("rewrite table must be a JSON object of {original: rewrite}");
    std::map<std::string, std::string> table;
    for (const auto& [key, value] : doc.items()) {
        if (!value.is_string()) throw Error("rewrite table values must be strings");
        table[key] = value.get<std::string>();
    }
    return MockParaphraser(std::move(table));
}

InferenceAnswer MockAttacker::infer(const PvaQuery& query) const {
    std::string payload;
    for (const auto& c : query.comments) {
        payload += c.text;
        payload += '\n';
    }

    InferenceAnswer answer;
    for (auto kind : query.target_attributes) {
        std::string value = kUnknown;
        for (const auto& rule : table_) {
            if (rule.kind != kind) continue;
            if (payload.find(rule.keyword) != std::string::npos) {
                value = rule.value;
                break;
            }
        }
        answer.predictions[kind] = std::move(value);
    }
    answer.raw_response = to_json(answer)["predictions"].dump();
    return answer;
}

MockAttacker MockAttacker::load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open keyword table: " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_array())
        throw Error("keyword table must be a JSON array");
    std::vector<KeywordRule> table;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("keyword") || !item.contains("attribute") ||
            !item.contains("value"))
            throw Error("keyword table entries need keyword/attribute/value");
        table.push_back({item["keyword"].get<std::string>(),
                         attribute_from_tag(item["attribute"].get<std::string>()),
                         item["value"].get<std::string>()});
    }
    return MockAttacker(std::move(table));
}

MockAttacker MockAttacker::from_profiles(const std::vector<UserProfile>& profiles) {
    std::vector<KeywordRule> table;
    for (const auto& p : profiles) {
        for (const auto& [kind, value] : p.ground_truth) {
            table.push_back({value, kind, value});
        }
    }
    return MockAttacker(std::move(table));
}

} // namespace rcg
