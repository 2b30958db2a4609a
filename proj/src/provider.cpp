#include "tripost/provider.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "assets.hpp"
#include "tripost/errors.hpp"

namespace tripost {

namespace {

class SemaphoreGuard {
public:
    explicit SemaphoreGuard(std::counting_semaphore<64>& s) : s_(s) { s_.acquire(); }
    ~SemaphoreGuard() { s_.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

private:
    std::counting_semaphore<64>& s_;
};

std::ptrdiff_t clamp_in_flight(int n) {
    if (n < 1) return 1;
    return n > 64 ? 64 : n;
}

}  // namespace

HttpProviderClient::HttpProviderClient(HttpProviderConfig config)
    : config_(std::move(config)), in_flight_(clamp_in_flight(config_.max_in_flight)) {
    const auto scheme_end = config_.url.find("://");
    if (scheme_end == std::string::npos) throw ParameterError("provider url needs a scheme: " + config_.url);
    const auto path_at = config_.url.find('/', scheme_end + 3);
    scheme_host_port_ = config_.url.substr(0, path_at);
    path_ = path_at == std::string::npos ? "/" : config_.url.substr(path_at);
}

std::string HttpProviderClient::complete(const CompletionRequest& request) {
    SemaphoreGuard guard(in_flight_);
    httplib::Client client(scheme_host_port_);
    const auto secs = static_cast<time_t>(config_.timeout.count());
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = encode_completion_request(request);
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw ProviderTransportError("provider returned HTTP " + std::to_string(res->status));
        }
        return decode_completion_response(res->body);
    }
    throw ProviderTransportError("provider unreachable after " + std::to_string(config_.retries + 1) +
                                 " tries: " + last_error);
}

FixtureProvider::FixtureProvider(std::vector<std::string> completions) : completions_(std::move(completions)) {}

std::string FixtureProvider::complete(const CompletionRequest& request) {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    if (next_ >= completions_.size()) throw ProviderTransportError("fixture provider has no completions left");
    return completions_[next_++];
}

std::string encode_completion_request(const CompletionRequest& request) {
    nlohmann::ordered_json j;
    j["prompt"] = request.prompt;
    j["max_tokens"] = request.max_tokens;
    j["stop"] = request.stop;
    return j.dump();
}

CompletionRequest decode_completion_request(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        CompletionRequest r;
        r.prompt = j.at("prompt").get<std::string>();
        r.max_tokens = j.value("max_tokens", r.max_tokens);
        if (j.contains("stop")) r.stop = j.at("stop").get<std::vector<std::string>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ProviderFormatError(std::string("bad completion request: ") + e.what());
    }
}

std::string decode_completion_response(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        return j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderFormatError(std::string("bad completion response: ") + e.what());
    }
}

std::string prompt_template(TaskKind kind, std::string_view role) {
    return std::string(detail::asset("prompts/" + std::string(to_string(kind)) + "_" + std::string(role) + ".txt"));
}

std::string fill_template(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values) {
    std::string out(tmpl);
    for (const auto& [key, value] : values) {
        const std::string slot = "{{" + key + "}}";
        for (auto at = out.find(slot); at != std::string::npos; at = out.find(slot, at + value.size())) {
            out.replace(at, slot.size(), value);
        }
    }
    return out;
}

}  // namespace tripost
