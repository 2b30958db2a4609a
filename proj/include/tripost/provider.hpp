#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "tripost/task.hpp"

namespace tripost {

struct CompletionRequest {
    std::string prompt;
    int max_tokens = 512;
    std::vector<std::string> stop{"[END]"};
};

// Text-completion endpoint: POST {prompt, max_tokens, stop} -> {text}.
class ProviderClient {
public:
    virtual ~ProviderClient() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
};

struct HttpProviderConfig {
    std::string url;  // http://host:port/path
    int retries = 2;
    std::chrono::milliseconds backoff{200};
    std::chrono::seconds timeout{60};
    int max_in_flight = 4;
    std::string api_key_env = "TRIPOST_API_KEY";
};

class HttpProviderClient : public ProviderClient {
public:
    explicit HttpProviderClient(HttpProviderConfig config);
    std::string complete(const CompletionRequest& request) override;

private:
    HttpProviderConfig config_;
    std::string scheme_host_port_;
    std::string path_;
    std::counting_semaphore<64> in_flight_;
};

// Replays canned completions; records every prompt it receives.
class FixtureProvider : public ProviderClient {
public:
    explicit FixtureProvider(std::vector<std::string> completions);
    std::string complete(const CompletionRequest& request) override;
    const std::vector<CompletionRequest>& requests() const { return requests_; }

private:
    std::mutex mutex_;
    std::vector<std::string> completions_;
    std::size_t next_ = 0;
    std::vector<CompletionRequest> requests_;
};

// Request/response JSON bodies of the provider protocol.
std::string encode_completion_request(const CompletionRequest& request);
CompletionRequest decode_completion_request(const std::string& body);
std::string decode_completion_response(const std::string& body);

// Prompt templates keyed by (task, role). Roles: feedback, improve,
// attempt, self_feedback, self_improve.
std::string prompt_template(TaskKind kind, std::string_view role);
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string, std::string>>& values);

}  // namespace tripost
