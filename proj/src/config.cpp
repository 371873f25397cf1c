#include "coa/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "coa/errors.hpp"
#include "coa/util.hpp"

namespace coa {

namespace {

[[noreturn]] void bad_line(std::size_t line_no, const std::string& message) {
    throw ConfigError("line " + std::to_string(line_no) + ": " + message);
}

bool parse_bool(const std::string& value, std::size_t line_no, const std::string& key) {
    if (value == "true")
        return true;
    if (value == "false")
        return false;
    bad_line(line_no, "key \"" + key + "\" expects true or false, got \"" + value + "\"");
}

double parse_double(const std::string& value, std::size_t line_no, const std::string& key) {
    std::size_t consumed = 0;
    double parsed = 0.0;
    try {
        parsed = std::stod(value, &consumed);
    } catch (const std::exception&) {
        consumed = 0;
    }
    if (consumed != value.size() || value.empty())
        bad_line(line_no, "key \"" + key + "\" expects a number, got \"" + value + "\"");
    return parsed;
}

long long parse_int(const std::string& value, std::size_t line_no, const std::string& key) {
    std::size_t consumed = 0;
    long long parsed = 0;
    try {
        parsed = std::stoll(value, &consumed);
    } catch (const std::exception&) {
        consumed = 0;
    }
    if (consumed != value.size() || value.empty())
        bad_line(line_no, "key \"" + key + "\" expects an integer, got \"" + value + "\"");
    return parsed;
}

std::size_t parse_size(const std::string& value, std::size_t line_no, const std::string& key) {
    const auto parsed = parse_int(value, line_no, key);
    if (parsed < 0)
        bad_line(line_no, "key \"" + key + "\" must not be negative");
    return static_cast<std::size_t>(parsed);
}

using Setter = std::function<void(EngineConfig&, const std::string& value,
                                  std::size_t line_no, const std::string& key)>;

std::unordered_map<std::string, Setter> make_schema() {
    std::unordered_map<std::string, Setter> schema;
    const auto text = [&](const std::string& key, std::string EngineConfig::*field) {
        schema[key] = [field](EngineConfig& c, const std::string& v, std::size_t,
                              const std::string&) { c.*field = v; };
    };
    const auto size = [&](const std::string& key, std::size_t EngineConfig::*field) {
        schema[key] = [field](EngineConfig& c, const std::string& v, std::size_t n,
                              const std::string& k) { c.*field = parse_size(v, n, k); };
    };
    const auto integer = [&](const std::string& key, int EngineConfig::*field) {
        schema[key] = [field](EngineConfig& c, const std::string& v, std::size_t n,
                              const std::string& k) {
            c.*field = static_cast<int>(parse_int(v, n, k));
        };
    };
    const auto real = [&](const std::string& key, double EngineConfig::*field) {
        schema[key] = [field](EngineConfig& c, const std::string& v, std::size_t n,
                              const std::string& k) { c.*field = parse_double(v, n, k); };
    };
    const auto flag = [&](const std::string& key, bool Ablations::*field) {
        schema[key] = [field](EngineConfig& c, const std::string& v, std::size_t n,
                              const std::string& k) {
            c.ablations.*field = parse_bool(v, n, k);
        };
    };

    text("chat_backend", &EngineConfig::chat_backend);
    text("embed_backend", &EngineConfig::embed_backend);
    text("api_base", &EngineConfig::api_base);
    text("api_key", &EngineConfig::api_key);
    text("chat_model", &EngineConfig::chat_model);
    text("embed_model", &EngineConfig::embed_model);
    size("embed_dim", &EngineConfig::embed_dim);
    text("chat_script", &EngineConfig::chat_script);
    integer("max_attempts", &EngineConfig::max_attempts);
    integer("initial_backoff_ms", &EngineConfig::initial_backoff_ms);
    integer("timeout_s", &EngineConfig::timeout_s);

    schema["temperature"] = [](EngineConfig& c, const std::string& v, std::size_t n,
                               const std::string& k) {
        c.chat_params.temperature = parse_double(v, n, k);
    };
    schema["top_p"] = [](EngineConfig& c, const std::string& v, std::size_t n,
                         const std::string& k) {
        c.chat_params.top_p = parse_double(v, n, k);
    };
    schema["max_tokens"] = [](EngineConfig& c, const std::string& v, std::size_t n,
                              const std::string& k) {
        c.chat_params.max_tokens = static_cast<int>(parse_int(v, n, k));
    };
    schema["seed"] = [](EngineConfig& c, const std::string& v, std::size_t n,
                        const std::string& k) {
        c.chat_params.seed = static_cast<int>(parse_int(v, n, k));
    };
    schema["alpha"] = [](EngineConfig& c, const std::string& v, std::size_t n,
                         const std::string& k) {
        c.weights.alpha = parse_double(v, n, k);
    };
    schema["beta"] = [](EngineConfig& c, const std::string& v, std::size_t n,
                        const std::string& k) {
        c.weights.beta = parse_double(v, n, k);
    };
    schema["gamma"] = [](EngineConfig& c, const std::string& v, std::size_t n,
                         const std::string& k) {
        c.weights.gamma = parse_double(v, n, k);
    };

    real("threshold_t", &EngineConfig::threshold_t);
    real("awl_cap", &EngineConfig::awl_cap);
    size("ref_token_cap", &EngineConfig::ref_token_cap);
    size("top_k", &EngineConfig::top_k);
    size("top_m", &EngineConfig::top_m);
    real("sim_threshold", &EngineConfig::sim_threshold);
    size("chunk_size", &EngineConfig::chunk_size);
    size("chunk_overlap", &EngineConfig::chunk_overlap);

    text("search_backend", &EngineConfig::search_backend);
    text("search_endpoint", &EngineConfig::search_endpoint);
    text("search_api_key", &EngineConfig::search_api_key);
    text("search_fixture", &EngineConfig::search_fixture);
    real("requests_per_second", &EngineConfig::requests_per_second);
    size("content_char_cap", &EngineConfig::content_char_cap);

    text("store_path", &EngineConfig::store_path);
    text("data_path", &EngineConfig::data_path);

    flag("no_actions", &Ablations::no_actions);
    flag("no_verification", &Ablations::no_verification);
    flag("no_imputation", &Ablations::no_imputation);
    size("max_parallel_nodes", &EngineConfig::max_parallel_nodes);
    size("bench_workers", &EngineConfig::bench_workers);
    return schema;
}

void require(bool condition, const std::string& message) {
    if (!condition)
        throw ConfigError(message);
}

}  // namespace

EngineConfig parse_config_text(const std::string& text) {
    static const auto schema = make_schema();

    EngineConfig config;
    std::unordered_set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#' || stripped.front() == ';')
            continue;

        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            bad_line(line_no, "expected \"key = value\"");
        const auto key = trim(stripped.substr(0, eq));
        auto value = trim(stripped.substr(eq + 1));
        if (key.empty())
            bad_line(line_no, "missing key before '='");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);

        const auto handler = schema.find(key);
        if (handler == schema.end())
            bad_line(line_no, "unknown key \"" + key + "\"");
        if (!seen.insert(key).second)
            bad_line(line_no, "duplicate key \"" + key + "\"");
        handler->second(config, value, line_no, key);
    }
    return config;
}

void apply_env_overrides(EngineConfig& config) {
    const auto apply = [](const char* name, std::string& field) {
        const char* value = std::getenv(name);
        if (value != nullptr && *value != '\0')
            field = value;
    };
    apply("COA_API_KEY", config.api_key);
    apply("COA_API_BASE", config.api_base);
    apply("COA_SEARCH_KEY", config.search_api_key);
}

EngineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open())
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();

    auto config = parse_config_text(buffer.str());
    apply_env_overrides(config);
    config.validate();
    return config;
}

void EngineConfig::validate() const {
    require(chat_backend == "mock" || chat_backend == "http",
            "chat_backend must be \"mock\" or \"http\"");
    require(embed_backend == "mock" || embed_backend == "http",
            "embed_backend must be \"mock\" or \"http\"");
    require(search_backend == "none" || search_backend == "fixture" ||
                search_backend == "http",
            "search_backend must be \"none\", \"fixture\", or \"http\"");
    require(search_backend != "fixture" || !search_fixture.empty(),
            "search_backend \"fixture\" requires search_fixture");
    require(search_backend != "http" || !search_endpoint.empty(),
            "search_backend \"http\" requires search_endpoint");
    require(chat_backend != "http" || !api_base.empty(),
            "chat_backend \"http\" requires api_base");
    require(embed_backend != "http" || !api_base.empty(),
            "embed_backend \"http\" requires api_base");

    require(embed_dim >= 8, "embed_dim must be at least 8");
    require(max_attempts >= 1, "max_attempts must be at least 1");
    require(initial_backoff_ms >= 0, "initial_backoff_ms must not be negative");
    require(timeout_s >= 1, "timeout_s must be at least 1");
    require(chunk_size >= 1, "chunk_size must be at least 1");
    require(chunk_overlap < chunk_size, "chunk_overlap must be below chunk_size");
    require(requests_per_second > 0.0, "requests_per_second must be positive");
    require(content_char_cap >= 1, "content_char_cap must be at least 1");
    require(bench_workers >= 1, "bench_workers must be at least 1");

    try {
        run_config().validate();
    } catch (const InvalidInputError& e) {
        throw ConfigError(e.what());
    }
}

RunConfig EngineConfig::run_config() const {
    RunConfig cfg;
    cfg.top_k = top_k;
    cfg.top_m = top_m;
    cfg.sim_threshold = sim_threshold;
    cfg.threshold_T = threshold_t;
    cfg.weights = weights;
    cfg.awl_cap = awl_cap;
    cfg.ref_token_cap = ref_token_cap;
    cfg.chat_params = chat_params;
    cfg.ablations = ablations;
    cfg.max_parallel_nodes = max_parallel_nodes;
    return cfg;
}

Engine build_engine(const EngineConfig& config) {
    config.validate();

    Engine engine;
    HttpBackendConfig http;
    http.base_url = config.api_base;
    http.api_key = config.api_key;
    http.chat_model = config.chat_model;
    http.embed_model = config.embed_model;
    http.embed_dim = config.embed_dim;
    http.max_attempts = config.max_attempts;
    http.initial_backoff_ms = config.initial_backoff_ms;
    http.timeout_s = config.timeout_s;

    if (config.chat_backend == "http") {
        engine.chat = std::make_unique<HttpChatBackend>(http);
    } else if (config.chat_script.empty()) {
        engine.chat = std::make_unique<MockChatBackend>();
    } else {
        engine.chat = std::make_unique<MockChatBackend>(
            MockChatBackend::load_script(config.chat_script));
    }

    if (config.embed_backend == "http")
        engine.embedder = std::make_unique<HttpEmbeddingBackend>(http);
    else
        engine.embedder = std::make_unique<MockEmbeddingBackend>(config.embed_dim);

    if (config.search_backend == "fixture") {
        engine.search = std::make_shared<FixtureSearchClient>(
            FixtureSearchClient::from_file(config.search_fixture));
    } else if (config.search_backend == "http") {
        HttpSearchClient::Config search;
        search.endpoint = config.search_endpoint;
        search.api_key = config.search_api_key;
        search.requests_per_second = config.requests_per_second;
        search.timeout_s = config.timeout_s;
        search.content_char_cap = config.content_char_cap;
        engine.search = std::make_shared<HttpSearchClient>(std::move(search));
    }

    if (!config.store_path.empty()) {
        engine.store = std::make_shared<VectorStore>(load_store(config.store_path));
        const auto chunks = engine.store->chunks();
        if (!chunks.empty() && chunks.front().vector.size() != engine.embedder->dim())
            throw ConfigError("store dimension " +
                              std::to_string(chunks.front().vector.size()) +
                              " does not match embed_dim " +
                              std::to_string(engine.embedder->dim()));
    }

    if (!config.data_path.empty())
        engine.data = std::make_shared<DataSource>(DataSource::from_csv(config.data_path));

    return engine;
}

}  // namespace coa
