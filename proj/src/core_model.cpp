#include "rcg/core_model.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

using nlohmann::json;

namespace rcg {

namespace {

constexpr std::array<std::string_view, kAttributeCount> kTags = {
    "AGE", "SEX", "INC", "LOC", "POB", "EDU", "OCC", "REL", "DIS", "ADV",
};

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool is_ascii_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::string trimmed(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

// Parses "<digits>" or "<digits> - <digits>" spanning the whole string.
// Returns the normalized token, or empty when the shape does not match.
std::string age_range_token(std::string_view s) {
    std::size_t i = 0;
    auto read_int = [&](std::uint64_t& out) {
        std::size_t start = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (i == start || i - start > 18) return false;
        auto rc = std::from_chars(s.data() + start, s.data() + i, out);
        return rc.ec == std::errc();
    };
    std::uint64_t lo = 0, hi = 0;
    if (!read_int(lo)) return {};
    while (i < s.size() && s[i] == ' ') ++i;
    if (i == s.size()) return std::to_string(lo);
    if (s[i] != '-') return {};
    ++i;
    while (i < s.size() && s[i] == ' ') ++i;
    if (!read_int(hi) || i != s.size()) return {};
    return std::to_string(lo) + "-" + std::to_string(hi);
}

// First run of digits anywhere in the string, normalized through an integer.
std::string first_integer_token(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) continue;
        std::size_t j = i;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        if (j - i > 18) return {}; // implausibly long, keep the text as-is
        std::uint64_t value = 0;
        std::from_chars(s.data() + i, s.data() + j, value);
        return std::to_string(value);
    }
    return {};
}

std::string comment_id_or_default(const json& item, std::size_t position) {
    if (item.contains("id")) {
        if (!item["id"].is_string()) throw MalformedQuery("comment id must be a string");
        return item["id"].get<std::string>();
    }
    return "c" + std::to_string(position);
}

Comment parse_comment(const json& item, std::size_t position) {
    if (!item.is_object()) throw MalformedQuery("comment entries must be objects");
    if (!item.contains("text") || !item["text"].is_string())
        throw MalformedQuery("comment is missing a text field");
    Comment c;
    c.id = comment_id_or_default(item, position);
    c.user_id = item.value("user_id", std::string{});
    c.text = item["text"].get<std::string>();
    if (trimmed(c.text).empty()) throw MalformedQuery("comment text is empty");
    return c;
}

std::set<AttributeKind> parse_targets(const json& raw) {
    std::set<AttributeKind> out;
    if (!raw.is_array()) throw MalformedQuery("target_attributes must be an array");
    for (const auto& t : raw) {
        if (!t.is_string()) throw MalformedQuery("target_attributes entries must be strings");
        out.insert(attribute_from_tag(t.get<std::string>()));
    }
    return out;
}

} // namespace

std::string_view attribute_tag(AttributeKind kind) {
    return kTags[static_cast<std::size_t>(kind)];
}

AttributeKind attribute_from_tag(std::string_view tag) {
    for (std::size_t i = 0; i < kTags.size(); ++i) {
        if (kTags[i] == tag) return static_cast<AttributeKind>(i);
    }
    throw UnknownAttributeTag("unknown attribute tag: " + std::string(tag));
}

const std::vector<AttributeKind>& all_attributes() {
    static const std::vector<AttributeKind> kAll = [] {
        std::vector<AttributeKind> v;
        for (std::size_t i = 0; i < kAttributeCount; ++i) v.push_back(static_cast<AttributeKind>(i));
        return v;
    }();
    return kAll;
}

PvaQuery parse_pva_query(const json& raw, const ParseOptions& opts) {
    if (!raw.is_object()) throw MalformedQuery("query document must be a JSON object");
    if (!raw.contains("system_prompt") || !raw["system_prompt"].is_string())
        throw MalformedQuery("missing system_prompt");
    if (!raw.contains("comments")) throw MalformedQuery("missing comments");
    const auto& comments = raw["comments"];
    if (!comments.is_array()) throw MalformedQuery("comments must be an array");
    if (comments.empty()) throw EmptyComments("query has no comments");

    PvaQuery q;
    q.system_prompt = raw["system_prompt"].get<std::string>();
    q.comments.reserve(comments.size());
    for (std::size_t i = 0; i < comments.size(); ++i)
        q.comments.push_back(parse_comment(comments[i], i));

    if (raw.contains("target_attributes"))
        q.target_attributes = parse_targets(raw["target_attributes"]);
    if (opts.require_targets && q.target_attributes.empty())
        throw MalformedQuery("target_attributes is empty");
    return q;
}

PvaQuery parse_pva_query_text(const std::string& raw_json, const ParseOptions& opts) {
    json doc = json::parse(raw_json, nullptr, false);
    if (doc.is_discarded()) throw MalformedQuery("request body is not valid JSON");
    return parse_pva_query(doc, opts);
}

json to_json(const PvaQuery& query) {
    json comments = json::array();
    for (const auto& c : query.comments)
        comments.push_back({{"id", c.id}, {"user_id", c.user_id}, {"text", c.text}});
    json targets = json::array();
    for (auto kind : query.target_attributes) targets.push_back(attribute_tag(kind));
    return {{"system_prompt", query.system_prompt},
            {"comments", std::move(comments)},
            {"target_attributes", std::move(targets)}};
}

json to_json(const DefendedQuery& defended, const std::set<AttributeKind>& target_attributes) {
    PvaQuery as_query{defended.system_prompt, defended.comments, target_attributes};
    return to_json(as_query);
}

json to_json(const std::vector<SlotProvenance>& provenance) {
    json slots = json::array();
    for (const auto& p : provenance) {
        slots.push_back({{"original_comment_id", p.original_comment_id},
                         {"replacement_entry_id", p.replacement_entry_id},
                         {"distance", p.distance}});
    }
    return slots;
}

json to_json(const InferenceAnswer& answer) {
    json predictions = json::object();
    for (const auto& [kind, value] : answer.predictions)
        predictions[std::string(attribute_tag(kind))] = value;
    return {{"predictions", std::move(predictions)}, {"raw_response", answer.raw_response}};
}

InferenceAnswer parse_inference_answer(const std::string& raw_text,
                                       const std::set<AttributeKind>& targets) {
    InferenceAnswer answer;
    answer.raw_response = raw_text;
    for (auto kind : targets) answer.predictions[kind] = "unknown";

    json doc = json::parse(raw_text, nullptr, false);
    if (doc.is_discarded()) return answer;
    const json* predictions = &doc;
    if (doc.is_object() && doc.contains("predictions") && doc["predictions"].is_object())
        predictions = &doc["predictions"];
    if (!predictions->is_object()) return answer;

    for (const auto& [key, value] : predictions->items()) {
        AttributeKind kind;
        try {
            kind = attribute_from_tag(key);
        } catch (const UnknownAttributeTag&) {
            continue; // model babble, not a caller error
        }
        if (!targets.contains(kind)) continue; // keys stay within the query's targets
        if (value.is_string()) {
            answer.predictions[kind] = value.get<std::string>();
        } else if (value.is_number_integer()) {
            answer.predictions[kind] = std::to_string(value.get<std::int64_t>());
        } else if (value.is_number()) {
            answer.predictions[kind] = std::to_string(value.get<double>());
        }
        if (answer.predictions[kind].empty()) answer.predictions[kind] = "unknown";
    }
    return answer;
}

std::string canonicalize_attribute_value(AttributeKind kind, std::string_view raw) {
    if (trimmed(raw).empty()) throw EmptyValue("attribute value is empty");

    std::string collapsed;
    collapsed.reserve(raw.size());
    bool pending_space = false;
    for (char ch : raw) {
        if (is_space(ch)) {
            pending_space = !collapsed.empty();
            continue;
        }
        if (pending_space) {
            collapsed.push_back(' ');
            pending_space = false;
        }
        collapsed.push_back(ascii_lower(ch));
    }

    std::size_t b = 0, e = collapsed.size();
    while (b < e && (is_ascii_punct(collapsed[b]) || collapsed[b] == ' ')) ++b;
    while (e > b && (is_ascii_punct(collapsed[e - 1]) || collapsed[e - 1] == ' ')) --e;
    std::string canonical = collapsed.substr(b, e - b);
    if (canonical.empty()) throw EmptyValue("attribute value is empty after normalization");

    if (kind == AttributeKind::AGE) {
        if (auto range = age_range_token(canonical); !range.empty()) return range;
        if (auto single = first_integer_token(canonical); !single.empty()) return single;
    }
    return canonical;
}

bool attribute_values_match(AttributeKind kind, std::string_view a, std::string_view b) {
    if (kind == AttributeKind::AGE) {
        std::uint64_t x = 0, y = 0;
        auto ra = std::from_chars(a.data(), a.data() + a.size(), x);
        auto rb = std::from_chars(b.data(), b.data() + b.size(), y);
        if (ra.ec == std::errc() && ra.ptr == a.data() + a.size() &&
            rb.ec == std::errc() && rb.ptr == b.data() + b.size())
            return x == y;
    }
    return a == b;
}

UserProfile parse_profile(const json& raw) {
    if (!raw.is_object()) throw Error("profile must be a JSON object");
    if (!raw.contains("user_id") || !raw["user_id"].is_string() ||
        raw["user_id"].get<std::string>().empty())
        throw Error("profile is missing user_id");

    UserProfile p;
    p.user_id = raw["user_id"].get<std::string>();
    if (raw.contains("comments")) {
        const auto& comments = raw["comments"];
        if (!comments.is_array()) throw Error("profile comments must be an array");
        for (std::size_t i = 0; i < comments.size(); ++i) {
            Comment c = parse_comment(comments[i], i);
            if (c.user_id.empty()) c.user_id = p.user_id;
            if (c.user_id != p.user_id)
                throw Error("comment " + c.id + " does not belong to user " + p.user_id);
            p.comments.push_back(std::move(c));
        }
    }
    if (raw.contains("ground_truth")) {
        const auto& truth = raw["ground_truth"];
        if (!truth.is_object()) throw Error("ground_truth must be an object");
        for (const auto& [tag, value] : truth.items()) {
            AttributeKind kind = attribute_from_tag(tag);
            if (!value.is_string() || trimmed(value.get<std::string>()).empty())
                throw Error("ground_truth." + tag + " must be a nonempty string");
            p.ground_truth[kind] = value.get<std::string>();
        }
    }
    return p;
}

json to_json(const UserProfile& profile) {
    json comments = json::array();
    for (const auto& c : profile.comments)
        comments.push_back({{"id", c.id}, {"user_id", c.user_id}, {"text", c.text}});
    json truth = json::object();
    for (const auto& [kind, value] : profile.ground_truth)
        truth[std::string(attribute_tag(kind))] = value;
    return {{"user_id", profile.user_id},
            {"comments", std::move(comments)},
            {"ground_truth", std::move(truth)}};
}

std::vector<UserProfile> load_profiles_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open profile corpus: " + path);

    std::vector<UserProfile> profiles;
    std::unordered_set<std::string> seen_comment_ids;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trimmed(line).empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded()) throw CorruptRecord(line_number, "profile line is not valid JSON");
        UserProfile p;
        try {
            p = parse_profile(doc);
        } catch (const Error& e) {
            throw CorruptRecord(line_number, e.what());
        }
        for (const auto& c : p.comments) {
            if (!seen_comment_ids.insert(c.id).second)
                throw CorruptRecord(line_number, "duplicate comment id: " + c.id);
        }
        profiles.push_back(std::move(p));
    }
    return profiles;
}

void save_profiles_jsonl(const std::vector<UserProfile>& profiles, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write profile corpus: " + path);
    for (const auto& p : profiles) out << to_json(p).dump() << '\n';
}

} // namespace rcg
