#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rcg/confused_retrieval.hpp"
#include "rcg/core_model.hpp"
#include "rcg/disturbed_db.hpp"

namespace rcg {

enum class ClassifierMode { HeaderFlag, RuleBased, AlwaysOn };
enum class Classification { Benign, Pva };

ClassifierMode classifier_mode_from(std::string_view name);
std::string_view classifier_mode_name(ClassifierMode mode);

// header-flag trusts the request header, rule-based matches the system
// prompt against a pattern list (case-insensitive substring; no match or no
// patterns resolves to benign), always-on flags everything.
Classification classify(const PvaQuery& query, ClassifierMode mode,
                        const std::vector<std::string>& patterns, bool header_flag);

struct GatewayConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080; // 0 binds an ephemeral port
    std::string upstream_endpoint;
    std::string upstream_model = "upstream";
    std::string database_path;
    // Query-side embedder; defaults to the spec the database was built with.
    std::optional<EmbedderSpec> embedder_override;
    ClassifierMode classifier_mode = ClassifierMode::HeaderFlag;
    std::vector<std::string> pva_patterns;
    RetrievalStrategy strategy = RetrievalStrategy::most_irrelevant();
    double timeout_seconds = 30.0;
    int retries = 1;
    std::string pva_header = "X-Eval-PVA";
};

// Key-value config file ("key = value", # comments). Every key can be
// overridden via an RCG_<KEY> environment variable.
GatewayConfig load_gateway_config(const std::string& path);
std::vector<std::string> load_pattern_list(const std::string& path);

// The online service. Construction loads the database and builds the scan
// index; any load failure throws and the gateway refuses to start.
class Gateway {
  public:
    explicit Gateway(GatewayConfig config, std::ostream* log = nullptr);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    int start();  // binds and serves on a background thread; returns the port
    void run();   // binds and serves on the calling thread (CLI mode)
    void stop();
    int port() const;

    const GatewayConfig& config() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace rcg
