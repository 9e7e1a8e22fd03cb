// SPDX-License-Identifier: Apache-2.0
#include "provsem/provider.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "provsem/error.hpp"

namespace provsem {

using nlohmann::json;

std::string api_key_from_env() {
    const char* key = std::getenv(kApiKeyEnvVar);
    if (!key || !*key)
        throw Error(ErrorKind::Config,
                    std::string("credential missing: set ") + kApiKeyEnvVar);
    return key;
}

namespace {

struct SplitUrl {
    std::string host;  // scheme://host[:port]
    std::string prefix;
};

SplitUrl split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorKind::Config, "base_url must include a scheme: " + base_url);
    auto path_start = base_url.find('/', scheme_end + 3);
    SplitUrl out;
    if (path_start == std::string::npos) {
        out.host = base_url;
    } else {
        out.host = base_url.substr(0, path_start);
        out.prefix = base_url.substr(path_start);
        while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    }
    return out;
}

// POSTs with bounded retries on transport errors, 429 and 5xx.
json post_json(const HttpProviderOptions& options, const std::string& path, const json& body) {
    const SplitUrl url = split_base_url(options.base_url);
    std::string last_error;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto backoff =
                std::chrono::milliseconds(options.retry_backoff_ms) * (1 << (attempt - 1));
            std::this_thread::sleep_for(backoff);
        }
        httplib::Client client(url.host);
        client.set_connection_timeout(options.timeout_sec);
        client.set_read_timeout(options.timeout_sec);
        httplib::Headers headers;
        if (!options.api_key.empty())
            headers.emplace("Authorization", "Bearer " + options.api_key);
        auto res = client.Post(url.prefix + path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw ProviderError("provider returned HTTP " + std::to_string(res->status) + ": " +
                                res->body.substr(0, 512));
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw ProviderError(std::string("provider returned invalid JSON: ") + e.what());
        }
    }
    throw ProviderError("provider unreachable after " + std::to_string(options.max_retries + 1) +
                        " attempts (" + last_error + ")");
}

}  // namespace

HttpChatProvider::HttpChatProvider(HttpProviderOptions options) : options_(std::move(options)) {}

std::string HttpChatProvider::chat(const std::string& system_text, const std::string& user_text,
                                   const std::string& model_id) {
    json body;
    body["model"] = model_id;
    body["temperature"] = options_.temperature;
    body["messages"] = json::array({{{"role", "system"}, {"content", system_text}},
                                    {{"role", "user"}, {"content", user_text}}});
    const json res = post_json(options_, "/chat/completions", body);
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unexpected chat response shape: ") + e.what());
    }
}

HttpEmbedProvider::HttpEmbedProvider(HttpProviderOptions options)
    : options_(std::move(options)) {}

std::vector<std::vector<double>> HttpEmbedProvider::embed_batch(
    const std::vector<std::string>& texts, const std::string& model_id) {
    json body;
    body["model"] = model_id;
    body["input"] = texts;
    const json res = post_json(options_, "/embeddings", body);
    try {
        std::vector<std::vector<double>> rows(texts.size());
        for (const auto& item : res.at("data")) {
            const auto index = item.at("index").get<std::size_t>();
            if (index >= rows.size())
                throw ProviderError("embedding response index out of range");
            rows[index] = item.at("embedding").get<std::vector<double>>();
        }
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].empty())
                throw ProviderError("embedding response missing row " + std::to_string(i));
        return rows;
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unexpected embeddings response shape: ") + e.what());
    }
}

}  // namespace provsem
