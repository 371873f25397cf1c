#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "coa/config.hpp"
#include "coa/errors.hpp"

using namespace coa;
using nlohmann::json;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p, const std::string& content) : path(std::move(p)) {
        std::ofstream out(path, std::ios::trunc | std::ios::binary);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

struct EnvVar {
    std::string name;
    EnvVar(std::string n, const std::string& value) : name(std::move(n)) {
        setenv(name.c_str(), value.c_str(), 1);
    }
    ~EnvVar() { unsetenv(name.c_str()); }
};

void expect_config_error(const std::string& text, const std::string& needle) {
    try {
        parse_config_text(text);
        FAIL("expected ConfigError for: " << text);
    } catch (const ConfigError& e) {
        CAPTURE(text);
        CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
}

}  // namespace

TEST_CASE("defaults validate and map onto a run config") {
    EngineConfig config;
    CHECK_NOTHROW(config.validate());

    const auto cfg = config.run_config();
    CHECK(cfg.top_k == 3);
    CHECK(cfg.top_m == 8);
    CHECK(cfg.sim_threshold == 0.8);
    CHECK(cfg.threshold_T == 0.5);
    CHECK(cfg.weights.alpha == 0.4);
    CHECK(cfg.ref_token_cap == 512);
    CHECK(cfg.chat_params.temperature == 0.0);
    CHECK(cfg.chat_params.max_tokens == 1000);
    CHECK(cfg.chat_params.seed == 1);
    CHECK(cfg.max_parallel_nodes == 1);
    CHECK_FALSE(cfg.ablations.no_actions);
}

TEST_CASE("parse_config_text reads the full key set") {
    const std::string text =
        "# engine setup\r\n"
        "chat_backend = http\n"
        "embed_backend = http\n"
        "api_base = \"https://llm.example.com\"\n"
        "api_key = sk-local\n"
        "chat_model = test-chat\n"
        "embed_model = test-embed\n"
        "embed_dim = 1536\n"
        "; retry tuning\n"
        "max_attempts = 5\n"
        "initial_backoff_ms = 100\n"
        "timeout_s = 12\n"
        "\n"
        "temperature = 0.5\n"
        "top_p = 0.9\n"
        "max_tokens = 256\n"
        "seed = 7\n"
        "alpha = 0.5\n"
        "beta = 0.3\n"
        "gamma = 0.2\n"
        "threshold_t = 0.6\n"
        "awl_cap = 12\n"
        "ref_token_cap = 128\n"
        "top_k = 2\n"
        "top_m = 6\n"
        "sim_threshold = 0.75\n"
        "chunk_size = 500\n"
        "chunk_overlap = 50\n"
        "search_backend = http\n"
        "search_endpoint = \"https://serp.example.com/search\"\n"
        "search_api_key = serp-key\n"
        "requests_per_second = 2.5\n"
        "content_char_cap = 2000\n"
        "store_path = store.jsonl\n"
        "data_path = data.csv\n"
        "no_actions = false\n"
        "no_verification = true\n"
        "no_imputation = false\n"
        "max_parallel_nodes = 4\n"
        "bench_workers = 2\n";

    const auto config = parse_config_text(text);
    CHECK(config.chat_backend == "http");
    CHECK(config.api_base == "https://llm.example.com");
    CHECK(config.api_key == "sk-local");
    CHECK(config.embed_dim == 1536);
    CHECK(config.max_attempts == 5);
    CHECK(config.chat_params.temperature == 0.5);
    CHECK(config.chat_params.seed == 7);
    CHECK(config.weights.beta == 0.3);
    CHECK(config.threshold_t == 0.6);
    CHECK(config.awl_cap == 12.0);
    CHECK(config.ref_token_cap == 128);
    CHECK(config.top_k == 2);
    CHECK(config.chunk_overlap == 50);
    CHECK(config.search_backend == "http");
    CHECK(config.search_endpoint == "https://serp.example.com/search");
    CHECK(config.requests_per_second == 2.5);
    CHECK(config.store_path == "store.jsonl");
    CHECK(config.data_path == "data.csv");
    CHECK(config.ablations.no_verification);
    CHECK_FALSE(config.ablations.no_imputation);
    CHECK(config.max_parallel_nodes == 4);
    CHECK(config.bench_workers == 2);
    CHECK_NOTHROW(config.validate());
}

TEST_CASE("parse_config_text rejects malformed lines") {
    expect_config_error("nonsense_key = 1\n", "unknown key \"nonsense_key\"");
    expect_config_error("top_k = 1\ntop_k = 2\n", "line 2: duplicate key");
    expect_config_error("top_k\n", "expected \"key = value\"");
    expect_config_error("= 3\n", "missing key");
    expect_config_error("no_actions = yes\n", "expects true or false");
    expect_config_error("top_k = three\n", "expects an integer");
    expect_config_error("top_k = -2\n", "must not be negative");
    expect_config_error("sim_threshold = high\n", "expects a number");
    expect_config_error("top_k = 1x\n", "expects an integer");
}

TEST_CASE("validate rejects out-of-range settings") {
    const auto expect_invalid = [](auto mutate, const std::string& needle) {
        EngineConfig config;
        mutate(config);
        try {
            config.validate();
            FAIL("expected ConfigError containing: " << needle);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };

    expect_invalid([](EngineConfig& c) { c.chat_backend = "quantum"; }, "chat_backend");
    expect_invalid([](EngineConfig& c) { c.search_backend = "fixture"; },
                   "requires search_fixture");
    expect_invalid([](EngineConfig& c) { c.search_backend = "http"; },
                   "requires search_endpoint");
    expect_invalid([](EngineConfig& c) { c.embed_dim = 4; }, "embed_dim");
    expect_invalid([](EngineConfig& c) { c.chunk_overlap = 1000; }, "chunk_overlap");
    expect_invalid([](EngineConfig& c) { c.bench_workers = 0; }, "bench_workers");
    expect_invalid([](EngineConfig& c) { c.weights.gamma = 0.4; }, "weights");
    expect_invalid([](EngineConfig& c) { c.threshold_t = 1.5; }, "threshold");
    expect_invalid([](EngineConfig& c) { c.top_k = 0; }, "top_k");
    expect_invalid(
        [](EngineConfig& c) {
            c.chat_backend = "http";
            c.api_base = "";
        },
        "requires api_base");
}

TEST_CASE("environment variables override secrets") {
    EngineConfig config;
    config.api_key = "from-file";
    {
        EnvVar key("COA_API_KEY", "from-env");
        EnvVar base("COA_API_BASE", "https://alt.example.com");
        EnvVar serp("COA_SEARCH_KEY", "serp-env");
        apply_env_overrides(config);
    }
    CHECK(config.api_key == "from-env");
    CHECK(config.api_base == "https://alt.example.com");
    CHECK(config.search_api_key == "serp-env");

    EngineConfig untouched;
    untouched.api_key = "keep";
    {
        EnvVar key("COA_API_KEY", "");
        apply_env_overrides(untouched);
    }
    CHECK(untouched.api_key == "keep");
}

TEST_CASE("load_config reads, overrides, and validates") {
    TempFile file("config_load_test.cfg",
                  "top_k = 2\n"
                  "api_key = file-key\n");
    {
        EnvVar key("COA_API_KEY", "env-key");
        const auto config = load_config(file.path);
        CHECK(config.top_k == 2);
        CHECK(config.api_key == "env-key");
    }

    CHECK_THROWS_AS(load_config("missing_config.cfg"), ConfigError);

    TempFile bad("config_bad_test.cfg", "top_k = 0\n");
    CHECK_THROWS_AS(load_config(bad.path), ConfigError);
}

TEST_CASE("build_engine assembles mock backends by default") {
    const auto engine = build_engine(EngineConfig{});
    REQUIRE(engine.chat != nullptr);
    REQUIRE(engine.embedder != nullptr);
    CHECK(engine.search == nullptr);
    CHECK(engine.store == nullptr);
    CHECK(engine.data == nullptr);
    CHECK(engine.embedder->dim() == 16);
    CHECK(engine.chat->chat_complete({{"user", "ping"}}, ChatParams{}) ==
          "[echo] ping");
}

TEST_CASE("build_engine loads scripts, stores, and data sources") {
    const MessageList probe{{"user", "scripted?"}};
    const json script{{prompt_hash(probe), "scripted reply"}};
    TempFile script_file("config_script_test.json", script.dump());

    MockEmbeddingBackend embedder(16);
    VectorStore store;
    store.upsert_chunks("doc", {"alpha text"}, embedder);
    const std::string store_path = "config_store_test.jsonl";
    save_store(store, store_path);

    TempFile csv("config_data_test.csv", "key,value\nbtc,100\n");
    TempFile fixture("config_fixture_test.jsonl",
                     R"({"query":"q","results":[{"title":"t","snippet":"s","url":"u"}]})"
                     "\n");

    EngineConfig config;
    config.chat_script = script_file.path;
    config.store_path = store_path;
    config.data_path = csv.path;
    config.search_backend = "fixture";
    config.search_fixture = fixture.path;

    const auto engine = build_engine(config);
    CHECK(engine.chat->chat_complete(probe, ChatParams{}) == "scripted reply");
    REQUIRE(engine.store != nullptr);
    CHECK(engine.store->size() == 1);
    REQUIRE(engine.data != nullptr);
    REQUIRE(engine.search != nullptr);
    CHECK(engine.search->search("q", 5).size() == 1);

    EngineConfig mismatched = config;
    mismatched.embed_dim = 32;
    CHECK_THROWS_AS(build_engine(mismatched), ConfigError);

    std::remove(store_path.c_str());
}

TEST_CASE("an engine built from config answers questions end to end") {
    const std::string question = "Config question?";
    const std::string markup =
        "[Node 1]\nAction: data-analyzing\nSub: s?\n[Guess Answer] g\n";

    const auto chain_prompt = build_chain_prompt(question, default_action_catalog());
    auto chain = parse_chain(markup, question);
    chain.nodes[0].resolved_answer = "g";
    const auto final_prompt = build_final_prompt(chain, question);

    const json script{{prompt_hash(chain_prompt.role_messages), markup},
                      {prompt_hash(final_prompt.role_messages), "[Final Content] ok"}};
    TempFile script_file("config_e2e_script.json", script.dump());

    EngineConfig config;
    config.chat_script = script_file.path;

    const auto engine = build_engine(config);
    const auto answer = run_question(question, engine.deps(), config.run_config());
    CHECK(answer.text == "ok");
    CHECK(answer.trace.usage.chat_calls == 2);
}
