#pragma once

#include <memory>
#include <string>

#include "coa/executor.hpp"

namespace coa {

/// Every tunable the engine exposes, with the shipped defaults. Loaded from
/// a flat "key = value" config file ('#' or ';' lines are comments, values
/// may be double-quoted); unknown or duplicate keys are rejected.
struct EngineConfig {
    std::string chat_backend = "mock";   // mock | http
    std::string embed_backend = "mock";  // mock | http
    std::string api_base = "https://api.openai.com";
    std::string api_key;
    std::string chat_model = "gpt-3.5-turbo";
    std::string embed_model = "text-embedding-ada-002";
    std::size_t embed_dim = 16;  // mock default; raise to 1536 for http
    std::string chat_script;     // mock reply script (JSON), empty for echo
    int max_attempts = 3;
    int initial_backoff_ms = 500;
    int timeout_s = 30;

    ChatParams chat_params;
    Weights weights;
    double threshold_t = 0.5;
    double awl_cap = kDefaultAwlCap;
    std::size_t ref_token_cap = 512;
    std::size_t top_k = 3;
    std::size_t top_m = 8;
    double sim_threshold = 0.8;
    std::size_t chunk_size = 1000;
    std::size_t chunk_overlap = 200;

    std::string search_backend = "none";  // none | fixture | http
    std::string search_endpoint;
    std::string search_api_key;
    std::string search_fixture;
    double requests_per_second = 4.0;
    std::size_t content_char_cap = 4000;

    std::string store_path;  // persisted knowledge store, empty for none
    std::string data_path;   // CSV data source, empty for none

    Ablations ablations;
    std::size_t max_parallel_nodes = 1;
    std::size_t bench_workers = 1;

    /// Throws ConfigError on out-of-range values or inconsistent backend
    /// selections (e.g. a fixture search client without a fixture path).
    void validate() const;

    RunConfig run_config() const;
};

/// Parses config text without validating it.
EngineConfig parse_config_text(const std::string& text);

/// Reads the file, applies the COA_API_KEY / COA_API_BASE / COA_SEARCH_KEY
/// environment overrides (ignored when unset or empty), and validates.
EngineConfig load_config(const std::string& path);

void apply_env_overrides(EngineConfig& config);

/// Owning bundle of everything a pipeline run needs.
struct Engine {
    std::unique_ptr<ChatBackend> chat;
    std::unique_ptr<EmbeddingBackend> embedder;
    std::shared_ptr<SearchClient> search;
    std::shared_ptr<VectorStore> store;
    std::shared_ptr<DataSource> data;

    EngineDeps deps() const { return {*chat, *embedder, search, store, data}; }
};

/// Instantiates backends, clients, and resources per the config. File-backed
/// resources load eagerly so path problems surface before any model call.
Engine build_engine(const EngineConfig& config);

}  // namespace coa
