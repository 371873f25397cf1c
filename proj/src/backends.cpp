#include "coa/backends.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "coa/errors.hpp"
#include "coa/scoring.hpp"
#include "coa/util.hpp"

namespace coa {

namespace {

using nlohmann::json;

bool transient_status(int status) { return status == 429 || status >= 500; }

std::string error_message(const std::string& body) {
    try {
        const auto j = json::parse(body);
        if (j.contains("error") && j["error"].contains("message"))
            return j["error"]["message"].get<std::string>();
    } catch (const json::exception&) {
    }
    return body;
}

/// POSTs a JSON body, retrying transport failures and transient statuses
/// with exponential backoff. Returns the parsed 2xx response body.
json http_post_json(const HttpBackendConfig& cfg, const std::string& path,
                    const json& body) {
    const httplib::Headers headers = {
        {"Authorization", "Bearer " + cfg.api_key},
    };
    const std::string payload = body.dump();

    std::string last_failure = "no attempt made";
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        if (attempt > 1) {
            const auto delay = std::chrono::milliseconds(
                cfg.initial_backoff_ms << (attempt - 2));
            std::this_thread::sleep_for(delay);
        }

        httplib::Client client(cfg.base_url);
        client.set_connection_timeout(cfg.timeout_s, 0);
        client.set_read_timeout(cfg.timeout_s, 0);
        client.set_write_timeout(cfg.timeout_s, 0);

        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                last_failure = std::string("malformed response body: ") + e.what();
                continue;
            }
        }
        if (transient_status(res->status)) {
            last_failure = "status " + std::to_string(res->status);
            continue;
        }
        throw BackendRejectedError(res->status, error_message(res->body));
    }
    throw BackendUnavailableError("request to " + path + " failed after " +
                                  std::to_string(cfg.max_attempts) +
                                  " attempts (" + last_failure + ")");
}

}  // namespace

void ChatParams::validate() const {
    if (temperature < 0.0) throw InvalidInputError("temperature must be >= 0");
    if (top_p <= 0.0 || top_p > 1.0) throw InvalidInputError("top_p must be in (0, 1]");
    if (max_tokens < 1) throw InvalidInputError("max_tokens must be >= 1");
}

std::string prompt_hash(const MessageList& messages) {
    std::string canonical;
    for (const auto& [role, content] : messages) {
        canonical += role;
        canonical += '\n';
        canonical += content;
        canonical += '\n';
    }
    return sha256_hex(canonical);
}

std::string ChatBackend::chat_complete(const MessageList& messages,
                                       const ChatParams& params) {
    if (messages.empty()) throw InvalidInputError("messages must be nonempty");
    params.validate();
    chat_calls_.fetch_add(1);
    return complete_impl(messages, params);
}

UsageCounters ChatBackend::usage() const {
    return {chat_calls_.load(), 0, 0};
}

std::vector<EmbeddingVector> EmbeddingBackend::embed_batch(
    const std::vector<std::string>& texts) {
    if (texts.empty()) throw InvalidInputError("batch must be nonempty");
    for (const auto& t : texts)
        if (t.empty()) throw InvalidInputError("batch texts must be nonempty");
    embed_calls_.fetch_add(1);
    embed_texts_.fetch_add(texts.size());
    return embed_impl(texts);
}

UsageCounters EmbeddingBackend::usage() const {
    return {0, embed_calls_.load(), embed_texts_.load()};
}

EmbeddingVector mock_embed(const std::string& text, std::size_t dim) {
    if (dim < 8) throw InvalidInputError("mock embedding dim must be >= 8");

    const std::string normalized = join(tokenize(text).tokens, " ");
    std::mt19937_64 rng(fnv1a64(normalized));

    EmbeddingVector v(dim);
    for (auto& x : v) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x = 2.0 * u - 1.0;
    }

    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        v[0] = 1.0;
        return v;
    }
    for (auto& x : v) x /= norm;
    return v;
}

std::map<std::string, std::string> MockChatBackend::load_script(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open script file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("script file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw IoError("script file " + path + ": expected a JSON object");

    std::map<std::string, std::string> script;
    for (const auto& [key, value] : j.items()) {
        if (!value.is_string())
            throw IoError("script file " + path + ": reply for " + key +
                          " is not a string");
        script[key] = value.get<std::string>();
    }
    return script;
}

MockChatBackend MockChatBackend::from_file(const std::string& path) {
    return MockChatBackend(load_script(path));
}

void MockChatBackend::add_reply(const std::string& prompt_hash_hex,
                                const std::string& reply) {
    script_[prompt_hash_hex] = reply;
}

std::string MockChatBackend::complete_impl(const MessageList& messages,
                                           const ChatParams&) {
    const auto it = script_.find(prompt_hash(messages));
    if (it != script_.end()) return it->second;
    return "[echo] " + messages.back().second;
}

std::vector<EmbeddingVector> MockEmbeddingBackend::embed_impl(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(mock_embed(t, dim_));
    return out;
}

std::string HttpChatBackend::complete_impl(const MessageList& messages,
                                           const ChatParams& params) {
    json body;
    body["model"] = config_.chat_model;
    body["messages"] = json::array();
    for (const auto& [role, content] : messages)
        body["messages"].push_back({{"role", role}, {"content", content}});
    body["temperature"] = params.temperature;
    body["top_p"] = params.top_p;
    body["max_tokens"] = params.max_tokens;
    body["seed"] = params.seed;

    const json reply = http_post_json(config_, "/v1/chat/completions", body);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw BackendUnavailableError(
            "chat response missing choices[0].message.content");
    }
}

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed_impl(
    const std::vector<std::string>& texts) {
    json body;
    body["model"] = config_.embed_model;
    body["input"] = texts;

    const json reply = http_post_json(config_, "/v1/embeddings", body);
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<bool> filled(texts.size(), false);
    try {
        for (const auto& item : reply.at("data")) {
            const auto index = item.at("index").get<std::size_t>();
            if (index >= out.size())
                throw BackendUnavailableError("embedding index out of range");
            out[index] = item.at("embedding").get<EmbeddingVector>();
            filled[index] = true;
        }
    } catch (const json::exception&) {
        throw BackendUnavailableError("embedding response missing data[].embedding");
    }

    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!filled[i])
            throw BackendUnavailableError("embedding response is missing an input");
        if (out[i].size() != config_.embed_dim)
            throw BackendUnavailableError("embedding has dimension " +
                                          std::to_string(out[i].size()) +
                                          ", expected " +
                                          std::to_string(config_.embed_dim));
        for (double x : out[i])
            if (!std::isfinite(x))
                throw BackendUnavailableError("embedding contains a non-finite value");
    }
    return out;
}

}  // namespace coa
