#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "coa/embedding.hpp"

namespace coa {

/// Ordered (role, content) messages sent to a chat backend.
using MessageList = std::vector<std::pair<std::string, std::string>>;

/// Sampling parameters forwarded to the chat provider.
struct ChatParams {
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 1000;
    int seed = 1;

    void validate() const;

    bool operator==(const ChatParams&) const = default;
};

/// Snapshot of a backend's usage counts.
struct UsageCounters {
    std::uint64_t chat_calls = 0;
    std::uint64_t embed_calls = 0;
    std::uint64_t embed_texts = 0;

    bool operator==(const UsageCounters&) const = default;
};

/// Stable key for scripting mock replies: the hex SHA-256 of the canonical
/// rendering of a message list, which is "<role>\n<content>\n" for each
/// message in order. Script files map this key to the canned reply.
std::string prompt_hash(const MessageList& messages);

/// Chat-completion provider. Thread-safe; usage counts update atomically.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    /// Sends the conversation and returns the model text. Increments
    /// chat_calls exactly once per invocation. Throws InvalidInputError on an
    /// empty message list or invalid params.
    std::string chat_complete(const MessageList& messages, const ChatParams& params);

    UsageCounters usage() const;

protected:
    virtual std::string complete_impl(const MessageList& messages,
                                      const ChatParams& params) = 0;

private:
    std::atomic<std::uint64_t> chat_calls_{0};
};

/// Embedding provider. Thread-safe; usage counts update atomically.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;

    /// Embeds every text, one vector per text in input order, all of
    /// dimension dim(). Increments embed_calls by 1 and embed_texts by the
    /// batch size. Throws InvalidInputError on an empty batch or empty text.
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

    virtual std::size_t dim() const = 0;

    UsageCounters usage() const;

protected:
    virtual std::vector<EmbeddingVector> embed_impl(
        const std::vector<std::string>& texts) = 0;

private:
    std::atomic<std::uint64_t> embed_calls_{0};
    std::atomic<std::uint64_t> embed_texts_{0};
};

/// Deterministic unit vector for a text: a fixed pseudorandom generator is
/// seeded from a stable hash of the token-normalized text (lowercased word
/// tokens joined by single spaces), emits dim draws in [-1, 1), and the
/// result is L2-normalized. Identical normalized texts give bit-identical
/// vectors on every platform. Throws InvalidInputError when dim < 8.
EmbeddingVector mock_embed(const std::string& text, std::size_t dim);

/// Chat backend scripted by {prompt_hash -> reply}. Unscripted prompts get a
/// deterministic echo of the last message.
class MockChatBackend : public ChatBackend {
public:
    MockChatBackend() = default;
    explicit MockChatBackend(std::map<std::string, std::string> script)
        : script_(std::move(script)) {}

    /// Loads a script file: a JSON object {prompt_sha256_hex: reply_text}.
    static MockChatBackend from_file(const std::string& path);

    /// The parsed script map of such a file, for callers that construct the
    /// backend in place.
    static std::map<std::string, std::string> load_script(const std::string& path);

    void add_reply(const std::string& prompt_hash_hex, const std::string& reply);

protected:
    std::string complete_impl(const MessageList& messages,
                              const ChatParams& params) override;

private:
    std::map<std::string, std::string> script_;
};

/// Embedding backend producing mock_embed vectors.
class MockEmbeddingBackend : public EmbeddingBackend {
public:
    explicit MockEmbeddingBackend(std::size_t dim = 16) : dim_(dim) {}

    std::size_t dim() const override { return dim_; }

protected:
    std::vector<EmbeddingVector> embed_impl(
        const std::vector<std::string>& texts) override;

private:
    std::size_t dim_;
};

/// Connection settings shared by the HTTP backends. The conventional sources
/// are the COA_API_BASE and COA_API_KEY environment variables.
struct HttpBackendConfig {
    std::string base_url;
    std::string api_key;
    std::string chat_model = "gpt-3.5-turbo";
    std::string embed_model = "text-embedding-ada-002";
    std::size_t embed_dim = kDefaultEmbeddingDim;
    int max_attempts = 3;
    int initial_backoff_ms = 500;
    int timeout_s = 30;
};

/// Chat backend speaking the OpenAI-compatible protocol: POST
/// {base}/v1/chat/completions with a bearer token. Transient transport
/// failures are retried with exponential backoff; provider rejections carry
/// the HTTP status.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {}

protected:
    std::string complete_impl(const MessageList& messages,
                              const ChatParams& params) override;

private:
    HttpBackendConfig config_;
};

/// Embedding backend speaking the OpenAI-compatible protocol: POST
/// {base}/v1/embeddings.
class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(HttpBackendConfig config) : config_(std::move(config)) {}

    std::size_t dim() const override { return config_.embed_dim; }

protected:
    std::vector<EmbeddingVector> embed_impl(
        const std::vector<std::string>& texts) override;

private:
    HttpBackendConfig config_;
};

}  // namespace coa
