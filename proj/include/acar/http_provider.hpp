#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "acar/canonical_json.hpp"
#include "acar/error.hpp"
#include "acar/hash.hpp"
#include "acar/providers.hpp"

namespace acar {

namespace detail {

/// Counting semaphore with a runtime limit; bounds in-flight requests.
class RequestGate {
public:
    explicit RequestGate(int limit) : available_(limit > 0 ? limit : 1) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /v1/chat/completions
};

inline SplitUrl split_url(const std::string& url) {
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::CONFIG_ERROR, "endpoint missing scheme: " + url);
    }
    std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace detail

/// Chat-completion client over HTTP(S). Responses are recorded as-is;
/// determinism is not guaranteed and replay comparison never asserts on
/// them. Transport failures retry with exponential backoff and then
/// surface as PROVIDER_ERROR so the batch can degrade instead of dropping
/// the task.
class HttpProvider : public ModelProvider {
public:
    explicit HttpProvider(ProviderSpec spec)
        : spec_(std::move(spec)), gate_(spec_.max_concurrent) {
        if (spec_.endpoint.empty()) {
            throw Error(ErrorCode::CONFIG_ERROR, "http provider needs an endpoint");
        }
        if (!spec_.api_key_env.empty()) {
            const char* key = std::getenv(spec_.api_key_env.c_str());
            if (key != nullptr) api_key_ = key;
        }
    }

    const std::string& model_id() const override { return spec_.model_id; }
    ProviderKind kind() const override { return ProviderKind::HTTP; }
    const CostRate& rate() const override { return spec_.rate; }

    CallReceipt complete(const CallRequest& request) override {
        if (request.prompt.empty()) {
            throw Error(ErrorCode::PROVIDER_ERROR, "empty prompt");
        }
        gate_.acquire();
        struct GateRelease {
            detail::RequestGate& gate;
            ~GateRelease() { gate.release(); }
        } release{gate_};

        nlohmann::json payload = {
            {"model", spec_.model_id},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
        };
        std::string body = payload.dump();

        detail::SplitUrl url = detail::split_url(spec_.endpoint);
        std::string last_failure = "no attempt made";
        auto started = std::chrono::steady_clock::now();
        for (int attempt = 0; attempt < spec_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(spec_.backoff_ms << (attempt - 1)));
            }
            httplib::Client client(url.base);
            client.set_connection_timeout(spec_.timeout_seconds, 0);
            client.set_read_timeout(spec_.timeout_seconds, 0);
            httplib::Headers headers;
            if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
            auto res = client.Post(url.path, headers, body, "application/json");
            if (!res) {
                last_failure = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_failure = "http status " + std::to_string(res->status);
                continue;
            }
            try {
                return parse_response(request, res->body, started);
            } catch (const std::exception& ex) {
                last_failure = std::string("malformed response: ") + ex.what();
            }
        }
        throw Error(ErrorCode::PROVIDER_ERROR,
                    spec_.model_id + ": " + last_failure + " (attempts=" +
                        std::to_string(spec_.max_retries) + ")");
    }

private:
    CallReceipt parse_response(const CallRequest& request, const std::string& body,
                               std::chrono::steady_clock::time_point started) const {
        nlohmann::json j = nlohmann::json::parse(body);
        CallReceipt receipt;
        receipt.model_id = spec_.model_id;
        receipt.prompt_hash = sha256_hex(request.prompt);
        receipt.response_text =
            j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            receipt.input_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
            receipt.output_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
        }
        if (receipt.input_tokens == 0) receipt.input_tokens = whitespace_token_count(request.prompt);
        if (receipt.output_tokens == 0) {
            receipt.output_tokens = whitespace_token_count(receipt.response_text);
        }
        receipt.rate_in_usd_per_1k = spec_.rate.input_usd_per_1k;
        receipt.rate_out_usd_per_1k = spec_.rate.output_usd_per_1k;
        receipt.cost_usd = call_cost_usd(receipt.input_tokens, receipt.output_tokens, spec_.rate);
        auto elapsed = std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - started);
        receipt.latency_ms = round_decimal(elapsed.count(), 3);
        return receipt;
    }

    ProviderSpec spec_;
    std::string api_key_;
    detail::RequestGate gate_;
};

} // namespace acar
