#pragma once

#include <string>

#include "rcg/errors.hpp"

namespace rcg {

// Chat-completion contract shared by the paraphrasing model, the attack
// harness, and the gateway's upstream inference model. Implementations must
// be safe to call concurrently from several threads.
class ChatLlmClient {
  public:
    virtual ~ChatLlmClient() = default;

    // Returns the model's text reply, or throws UpstreamUnavailable once the
    // retry budget is exhausted. No silent retries beyond that budget.
    virtual std::string send(const std::string& system_prompt,
                             const std::string& user_content) = 0;
};

struct HttpResponse {
    int status = 0;
    std::string body;
    std::string content_type;
};

// Talks to a chat endpoint at {endpoint}/v1/chat. Requests carry the same
// JSON schema the gateway accepts; replies are either {"text": "..."} or a
// raw body, which send() returns verbatim.
class HttpChatClient : public ChatLlmClient {
  public:
    HttpChatClient(std::string endpoint, std::string model,
                   double timeout_seconds = 30.0, int retries = 1);

    std::string send(const std::string& system_prompt,
                     const std::string& user_content) override;

    // Single-shot raw relay: posts the body unmodified and returns the raw
    // response. Throws UpstreamUnavailable on transport failure.
    HttpResponse post_chat(const std::string& body,
                           const std::string& content_type = "application/json");

    const std::string& endpoint() const { return endpoint_; }
    const std::string& model() const { return model_; }

  private:
    std::string endpoint_;
    std::string model_;
    double timeout_seconds_;
    int retries_;
};

} // namespace rcg
