// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace provsem {

// Name of the environment variable holding the API credential.
inline constexpr const char* kApiKeyEnvVar = "PROVSEM_API_KEY";

// Reads the credential from the environment; throws a Config error when unset.
std::string api_key_from_env();

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    // Returns the assistant message content. Implementations must be safe to
    // call from multiple threads.
    virtual std::string chat(const std::string& system_text, const std::string& user_text,
                             const std::string& model_id) = 0;
};

class EmbedProvider {
public:
    virtual ~EmbedProvider() = default;
    // One row per input text, in input order, all rows the same width.
    virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts,
                                                         const std::string& model_id) = 0;
};

struct HttpProviderOptions {
    std::string base_url;          // e.g. "https://api.openai.com/v1"
    std::string api_key;
    int max_retries = 3;           // retries after the first attempt
    int retry_backoff_ms = 250;    // doubled per retry
    int timeout_sec = 120;
    double temperature = 0.0;      // pinned for reproducibility
};

// OpenAI-compatible chat-completions client (POST {base}/chat/completions).
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(HttpProviderOptions options);
    std::string chat(const std::string& system_text, const std::string& user_text,
                     const std::string& model_id) override;

private:
    HttpProviderOptions options_;
};

// OpenAI-compatible embeddings client (POST {base}/embeddings).
class HttpEmbedProvider : public EmbedProvider {
public:
    explicit HttpEmbedProvider(HttpProviderOptions options);
    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts,
                                                 const std::string& model_id) override;

private:
    HttpProviderOptions options_;
};

}  // namespace provsem
