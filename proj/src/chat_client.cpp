#include "rcg/chat_client.hpp"

#include <httplib.h>
#include <json.hpp>

using nlohmann::json;

namespace rcg {

HttpChatClient::HttpChatClient(std::string endpoint, std::string model,
                               double timeout_seconds, int retries)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      timeout_seconds_(timeout_seconds),
      retries_(retries) {
    if (endpoint_.empty()) throw Error("chat client requires an endpoint");
    if (timeout_seconds_ <= 0) throw Error("chat client timeout must be positive");
}

HttpResponse HttpChatClient::post_chat(const std::string& body,
                                       const std::string& content_type) {
    // A fresh client per call keeps this reentrant across threads.
    httplib::Client cli(endpoint_);
    auto whole = static_cast<time_t>(timeout_seconds_);
    auto usec = static_cast<time_t>((timeout_seconds_ - static_cast<double>(whole)) * 1e6);
    cli.set_connection_timeout(whole, usec);
    cli.set_read_timeout(whole, usec);
    cli.set_write_timeout(whole, usec);

    auto res = cli.Post("/v1/chat", body, content_type);
    if (!res)
        throw UpstreamUnavailable("upstream " + endpoint_ + ": " +
                                  httplib::to_string(res.error()));
    return {res->status, res->body, res->get_header_value("Content-Type")};
}

std::string HttpChatClient::send(const std::string& system_prompt,
                                 const std::string& user_content) {
    json body = {{"model", model_},
                 {"system_prompt", system_prompt},
                 {"comments", json::array({json{{"id", "m0"}, {"user_id", "client"},
                                                {"text", user_content}}})},
                 {"target_attributes", json::array()}};
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        try {
            HttpResponse res = post_chat(payload);
            if (res.status != 200) {
                last_error = "upstream returned status " + std::to_string(res.status);
                continue;
            }
            json doc = json::parse(res.body, nullptr, false);
            if (!doc.is_discarded() && doc.is_object() && doc.contains("text") &&
                doc["text"].is_string())
                return doc["text"].get<std::string>();
            return res.body;
        } catch (const UpstreamUnavailable& e) {
            last_error = e.what();
        }
    }
    throw UpstreamUnavailable("chat request failed after " + std::to_string(retries_ + 1) +
                              " attempts: " + last_error);
}

} // namespace rcg
