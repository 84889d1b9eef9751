#include "rcg/gateway.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rcg/chat_client.hpp"

using nlohmann::json;

namespace rcg {

namespace {

std::string lower_copy(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

std::string trim_copy(std::string_view s) {
    std::size_t b = 0, e = s.size();
    auto blank = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (b < e && blank(s[b])) ++b;
    while (e > b && blank(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

bool truthy(std::string_view value) {
    return value == "1" || value == "true" || value == "yes" || value == "on";
}

std::string error_body(std::string_view code) {
    return json{{"error", std::string(code)}}.dump();
}

} // namespace

ClassifierMode classifier_mode_from(std::string_view name) {
    if (name == "header-flag") return ClassifierMode::HeaderFlag;
    if (name == "rule-based") return ClassifierMode::RuleBased;
    if (name == "always-on") return ClassifierMode::AlwaysOn;
    throw Error("unknown classifier mode: " + std::string(name));
}

std::string_view classifier_mode_name(ClassifierMode mode) {
    switch (mode) {
        case ClassifierMode::HeaderFlag: return "header-flag";
        case ClassifierMode::RuleBased: return "rule-based";
        case ClassifierMode::AlwaysOn: return "always-on";
    }
    return "unknown";
}

Classification classify(const PvaQuery& query, ClassifierMode mode,
                        const std::vector<std::string>& patterns, bool header_flag) {
    switch (mode) {
        case ClassifierMode::HeaderFlag:
            return header_flag ? Classification::Pva : Classification::Benign;
        case ClassifierMode::RuleBased: {
            const std::string prompt = lower_copy(query.system_prompt);
            for (const auto& pattern : patterns) {
                if (pattern.empty()) continue;
                if (prompt.find(lower_copy(pattern)) != std::string::npos)
                    return Classification::Pva;
            }
            return Classification::Benign;
        }
        case ClassifierMode::AlwaysOn:
            return Classification::Pva;
    }
    return Classification::Benign;
}

std::vector<std::string> load_pattern_list(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open pattern list: " + path);
    std::vector<std::string> patterns;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim_copy(line);
        if (t.empty() || t[0] == '#') continue;
        patterns.push_back(std::move(t));
    }
    return patterns;
}

GatewayConfig load_gateway_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open gateway config: " + path);

    GatewayConfig cfg;
    auto apply = [&](const std::string& key, const std::string& value) {
        if (key == "listen_host") cfg.listen_host = value;
        else if (key == "listen_port") cfg.listen_port = std::stoi(value);
        else if (key == "upstream_endpoint") cfg.upstream_endpoint = value;
        else if (key == "upstream_model") cfg.upstream_model = value;
        else if (key == "database") cfg.database_path = value;
        else if (key == "embedder") cfg.embedder_override = parse_embedder_spec(value);
        else if (key == "classifier_mode") cfg.classifier_mode = classifier_mode_from(value);
        else if (key == "pva_patterns") cfg.pva_patterns = load_pattern_list(value);
        else if (key == "strategy") {
            if (value == "most_irrelevant") cfg.strategy = RetrievalStrategy::most_irrelevant();
            else if (value == "random") cfg.strategy = RetrievalStrategy::random(cfg.strategy.seed);
            else throw Error("unknown strategy: " + value);
        }
        else if (key == "random_seed") cfg.strategy.seed = std::stoull(value);
        else if (key == "timeout_seconds") cfg.timeout_seconds = std::stod(value);
        else if (key == "retries") cfg.retries = std::stoi(value);
        else if (key == "pva_header") cfg.pva_header = value;
        else throw Error("unknown config key: " + key);
    };

    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        std::string t = trim_copy(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw Error("config line " + std::to_string(line_number) + ": expected key = value");
        apply(trim_copy(t.substr(0, eq)), trim_copy(t.substr(eq + 1)));
    }

    static const char* kKeys[] = {"listen_host", "listen_port", "upstream_endpoint",
                                  "upstream_model", "database", "embedder", "classifier_mode",
                                  "pva_patterns", "strategy", "random_seed",
                                  "timeout_seconds", "retries", "pva_header"};
    for (const char* key : kKeys) {
        std::string env = "RCG_" + lower_copy(key);
        for (char& c : env)
            if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
        if (const char* value = std::getenv(env.c_str())) apply(key, value);
    }

    if (cfg.timeout_seconds <= 0) throw Error("timeout_seconds must be positive");
    if (cfg.retries < 0) throw Error("retries must be nonnegative");
    return cfg;
}

struct Gateway::Impl {
    GatewayConfig cfg;
    DisturbedDatabase db;
    std::unique_ptr<RetrievalIndex> index;
    EmbedderSpec query_embedder;

    httplib::Server server;
    std::thread listener;
    int bound_port = 0;

    std::ostream* log = nullptr;
    std::mutex log_mutex;

    void log_row(const json& row) {
        if (!log) return;
        std::lock_guard<std::mutex> guard(log_mutex);
        (*log) << row.dump() << '\n';
    }

    HttpResponse forward(const std::string& body, const std::string& content_type) {
        HttpChatClient upstream(cfg.upstream_endpoint, cfg.upstream_model, cfg.timeout_seconds,
                                cfg.retries);
        std::string last_error;
        for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
            try {
                return upstream.post_chat(body, content_type);
            } catch (const UpstreamUnavailable& e) {
                last_error = e.what();
            }
        }
        throw UpstreamUnavailable(last_error);
    }

    void handle_chat(const httplib::Request& req, httplib::Response& res) {
        const auto started = std::chrono::steady_clock::now();

        PvaQuery query;
        try {
            query = parse_pva_query_text(req.body, {.require_targets = false});
        } catch (const Error& e) {
            res.status = 400;
            res.set_content(json{{"error", "malformed_query"}, {"detail", e.what()}}.dump(),
                            "application/json");
            log_row({{"event", "reject"}, {"detail", e.what()}});
            return;
        }

        const bool header_flag = truthy(req.get_header_value(cfg.pva_header));
        const Classification cls =
            classify(query, cfg.classifier_mode, cfg.pva_patterns, header_flag);

        std::string upstream_body;
        std::string upstream_content_type = "application/json";
        json provenance;
        try {
            if (cls == Classification::Pva) {
                DefendedQuery defended =
                    defend_query(query, *index, query_embedder, cfg.strategy);
                upstream_body = to_json(defended, query.target_attributes).dump();
                provenance = {{"strategy", cfg.strategy.name()},
                              {"rank_basis", index->size()},
                              {"slots", to_json(defended.provenance)}};
            } else {
                // Transparency: the upstream sees exactly the bytes we got.
                upstream_body = req.body;
                upstream_content_type = req.get_header_value("Content-Type");
                if (upstream_content_type.empty()) upstream_content_type = "application/json";
            }
        } catch (const Error& e) {
            res.status = 500;
            res.set_content(error_body("defense_failed"), "application/json");
            log_row({{"event", "defense_failed"}, {"detail", e.what()}});
            return;
        }

        try {
            HttpResponse up = forward(upstream_body, upstream_content_type);
            // Covertness: relay the upstream reply byte-for-byte, no markers.
            res.status = up.status;
            res.set_content(up.body,
                            up.content_type.empty() ? "application/octet-stream"
                                                    : up.content_type.c_str());
        } catch (const UpstreamUnavailable&) {
            res.status = 502;
            res.set_content(error_body("upstream_unavailable"), "application/json");
        }

        const double latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                .count();
        json row = {{"event", "chat"},
                    {"classification", cls == Classification::Pva ? "pva" : "benign"},
                    {"mode", std::string(classifier_mode_name(cfg.classifier_mode))},
                    {"status", res.status},
                    {"upstream_latency_ms", latency_ms}};
        if (!provenance.is_null()) row["provenance"] = provenance;
        log_row(row);
    }

    void handle_defend(const httplib::Request& req, httplib::Response& res) {
        try {
            PvaQuery query = parse_pva_query_text(req.body, {.require_targets = false});
            DefendedQuery defended = defend_query(query, *index, query_embedder, cfg.strategy);
            json out = {{"query", to_json(defended, query.target_attributes)},
                        {"provenance",
                         {{"strategy", cfg.strategy.name()},
                          {"rank_basis", index->size()},
                          {"slots", to_json(defended.provenance)}}}};
            res.status = 200;
            res.set_content(out.dump(), "application/json");
        } catch (const Error& e) {
            res.status = 400;
            res.set_content(json{{"error", "defend_failed"}, {"detail", e.what()}}.dump(),
                            "application/json");
        }
    }

    void handle_health(const httplib::Request&, httplib::Response& res) {
        json out = {{"status", "ok"},
                    {"entries", index->size()},
                    {"dim", index->dim()},
                    {"strategy", cfg.strategy.name()}};
        res.status = 200;
        res.set_content(out.dump(), "application/json");
    }
};

Gateway::Gateway(GatewayConfig config, std::ostream* log) : impl_(std::make_unique<Impl>()) {
    impl_->cfg = std::move(config);
    impl_->log = log;

    if (impl_->cfg.database_path.empty())
        throw Error("gateway config needs a database path");
    if (impl_->cfg.upstream_endpoint.empty())
        throw Error("gateway config needs an upstream endpoint");
    if (impl_->cfg.timeout_seconds <= 0) throw Error("timeout must be positive");

    // Fail closed: a gateway that cannot defend must not serve.
    impl_->db = load_database(impl_->cfg.database_path);
    impl_->index = std::make_unique<RetrievalIndex>(impl_->db);
    impl_->query_embedder = impl_->cfg.embedder_override.value_or(impl_->db.embedder_spec);
    if (impl_->query_embedder.dim != impl_->index->dim())
        throw DimensionMismatch("query embedder dim " +
                                std::to_string(impl_->query_embedder.dim) +
                                " does not match database dim " +
                                std::to_string(impl_->index->dim()));

    auto& server = impl_->server;
    server.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
        impl_->handle_chat(req, res);
    });
    server.Post("/v1/defend", [this](const httplib::Request& req, httplib::Response& res) {
        impl_->handle_defend(req, res);
    });
    server.Get("/healthz", [this](const httplib::Request& req, httplib::Response& res) {
        impl_->handle_health(req, res);
    });
}

Gateway::~Gateway() { stop(); }

int Gateway::start() {
    auto& impl = *impl_;
    if (impl.cfg.listen_port == 0) {
        impl.bound_port = impl.server.bind_to_any_port(impl.cfg.listen_host);
        if (impl.bound_port <= 0) throw Error("failed to bind an ephemeral port");
    } else {
        if (!impl.server.bind_to_port(impl.cfg.listen_host, impl.cfg.listen_port))
            throw Error("failed to bind " + impl.cfg.listen_host + ":" +
                        std::to_string(impl.cfg.listen_port));
        impl.bound_port = impl.cfg.listen_port;
    }
    impl.listener = std::thread([&impl] { impl.server.listen_after_bind(); });
    impl.server.wait_until_ready();
    return impl.bound_port;
}

void Gateway::run() {
    start();
    impl_->listener.join();
}

void Gateway::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
}

int Gateway::port() const { return impl_->bound_port; }

const GatewayConfig& Gateway::config() const { return impl_->cfg; }

} // namespace rcg
