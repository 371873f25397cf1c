#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coa/bench.hpp"
#include "coa/config.hpp"

namespace fs = std::filesystem;
using namespace coa;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    const std::string out_path = "cli_out_" + std::to_string(counter) + ".txt";
    const std::string err_path = "cli_err_" + std::to_string(counter) + ".txt";
    ++counter;

    const std::string command =
        std::string(COA_BIN) + " " + args + " >" + out_path + " 2>" + err_path;
    const int status = std::system(command.c_str());

    CliResult result;
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return result;
}

/// Scratch directory that cleans up after the test case.
struct Scratch {
    fs::path root;
    explicit Scratch(const std::string& name) : root(name) {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~Scratch() { fs::remove_all(root); }

    std::string file(const std::string& name, const std::string& content) const {
        const auto path = root / name;
        fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        out << content;
        return path.string();
    }

    std::string path(const std::string& name) const { return (root / name).string(); }
};

void add_question(json& script, const std::string& question,
                  const std::string& markup,
                  const std::vector<std::string>& resolved,
                  const std::string& final_reply) {
    const auto prompt = build_chain_prompt(question, default_action_catalog());
    script[prompt_hash(prompt.role_messages)] = markup;

    auto chain = parse_chain(markup, question);
    REQUIRE(chain.nodes.size() == resolved.size());
    for (std::size_t i = 0; i < resolved.size(); ++i)
        chain.nodes[i].resolved_answer = resolved[i];
    script[prompt_hash(build_final_prompt(chain, question).role_messages)] =
        final_reply;
}

std::string one_node_markup(const std::string& sub, const std::string& guess) {
    return "[Node 1]\nAction: data-analyzing\nSub: " + sub + "\n[Guess Answer] " +
           guess + "\n";
}

}  // namespace

TEST_CASE("ask prints the scripted answer") {
    Scratch scratch("cli_ask_scratch");
    json script;
    add_question(script, "What is two plus two?",
                 one_node_markup("what is 2 + 2?", "four"), {"four"},
                 "[Final Content] four");
    const auto script_path = scratch.file("script.json", script.dump());
    const auto config_path =
        scratch.file("engine.cfg", "chat_script = " + script_path + "\n");

    const auto result =
        run_cli("ask \"What is two plus two?\" --config " + config_path);
    CHECK(result.code == 0);
    CHECK(result.out == "four\n");
    CHECK(result.err.empty());
}

TEST_CASE("ask writes traces and prints chains on request") {
    Scratch scratch("cli_trace_scratch");
    const std::string chunk = "line one\nline two";
    {
        VectorStore store;
        MockEmbeddingBackend embedder(16);
        store.upsert_chunks("note", {chunk}, embedder);
        save_store(store, scratch.path("store.jsonl"));
    }

    const std::string markup =
        "[Node 1]\nAction: data-analyzing\nSub: first part?\n[Guess Answer] one\n"
        "[Node 2]\nAction: knowledge-encoding\nSub: second part?\n[Unsolved Sub]\n";
    json script;
    add_question(script, "Two parts?", markup, {"one", chunk},
                 "[Final Content] both");
    const auto script_path = scratch.file("script.json", script.dump());
    const auto config_path =
        scratch.file("engine.cfg", "chat_script = " + script_path +
                                       "\nstore_path = " +
                                       scratch.path("store.jsonl") + "\n");
    const auto trace_path = scratch.path("trace.json");

    const auto result = run_cli("ask \"Two parts?\" --config " + config_path +
                                " --trace-out " + trace_path + " --show-chain");
    CHECK(result.code == 0);

    // multi-line imputed content must still render one node per line
    std::istringstream lines(result.out);
    std::string line;
    std::vector<std::string> seen;
    while (std::getline(lines, line))
        seen.push_back(line);
    REQUIRE(seen.size() == 3);
    CHECK(seen[0].find("[1] data-analyzing sub=\"first part?\"") == 0);
    CHECK(seen[1].find("[2] knowledge-encoding sub=\"second part?\"") == 0);
    CHECK(seen[0].find("answer=\"one\"") != std::string::npos);
    CHECK(seen[1].find("imputed") != std::string::npos);
    CHECK(seen[1].find("answer=\"line one line two\"") != std::string::npos);
    CHECK(seen[2] == "both");

    const auto trace = json::parse(slurp(trace_path));
    CHECK(trace["trace_version"] == 1);
    CHECK(trace["usage"]["chat_calls"] == 2);
}

TEST_CASE("ask exit codes distinguish failure classes") {
    Scratch scratch("cli_exit_scratch");

    const auto missing = run_cli("ask \"q?\" --config no_such_file.cfg");
    CHECK(missing.code == 2);
    CHECK(missing.out.empty());
    CHECK_FALSE(missing.err.empty());

    // echo-only mock chat never produces parseable markup
    const auto unscripted_cfg = scratch.file("plain.cfg", "top_k = 3\n");
    const auto failed = run_cli("ask \"Hopeless?\" --config " + unscripted_cfg);
    CHECK(failed.code == 3);

    const auto down_cfg = scratch.file("down.cfg",
                                       "chat_backend = http\n"
                                       "api_base = http://127.0.0.1:9\n"
                                       "max_attempts = 1\n"
                                       "initial_backoff_ms = 0\n"
                                       "timeout_s = 1\n");
    const auto down = run_cli("ask \"q?\" --config " + down_cfg);
    CHECK(down.code == 4);

    const auto usage = run_cli("nonsense-command");
    CHECK(usage.code != 0);
}

TEST_CASE("index builds a store from txt and md files") {
    Scratch scratch("cli_index_scratch");
    scratch.file("docs/a.txt", "alpha document text");
    scratch.file("docs/b.md", "bravo document text");
    scratch.file("docs/skip.bin", "ignored bytes");
    scratch.file("docs/sub/c.txt", "charlie nested text");
    const auto store_path = scratch.path("store.jsonl");

    const auto result = run_cli("index " + scratch.path("docs") + " --store " +
                                store_path);
    CHECK(result.code == 0);
    CHECK(result.out.find("indexed 3 chunks from 3 files") == 0);

    const auto store = load_store(store_path);
    CHECK(store.size() == 3);
    bool nested_seen = false;
    for (const auto& chunk : store.chunks())
        nested_seen = nested_seen || chunk.doc_id == "sub/c.txt";
    CHECK(nested_seen);
}

TEST_CASE("index handles empty and missing directories") {
    Scratch scratch("cli_index_edge_scratch");
    fs::create_directories(scratch.root / "empty");
    const auto store_path = scratch.path("store.jsonl");

    const auto empty = run_cli("index " + scratch.path("empty") + " --store " +
                               store_path);
    CHECK(empty.code == 0);
    CHECK(empty.out.find("indexed 0 chunks") == 0);
    CHECK(empty.err.find("warning") != std::string::npos);
    CHECK(load_store(store_path).empty());

    const auto missing =
        run_cli("index " + scratch.path("absent") + " --store " + store_path);
    CHECK(missing.code == 2);
}

namespace {

/// Four scripted questions; three finals contain their gold answers.
struct BenchFiles {
    Scratch scratch{"cli_bench_scratch"};
    std::string config_path;
    std::string dataset_path;

    BenchFiles() {
        json script;
        std::string dataset;
        for (int i = 1; i <= 4; ++i) {
            const std::string tag = std::to_string(i);
            const std::string question = "Question " + tag + "?";
            const std::string reply = i == 4
                                          ? "[Final Content] no idea"
                                          : "[Final Content] the answer " + tag;
            add_question(script, question, one_node_markup("sub " + tag + "?", "g"),
                         {"g"}, reply);
            dataset += json{{"id", "q" + tag},
                            {"question", question},
                            {"answers", json::array({"answer " + tag})}}
                           .dump() +
                       "\n";
        }
        const auto script_path = scratch.file("script.json", script.dump());
        config_path = scratch.file("engine.cfg", "chat_script = " + script_path + "\n");
        dataset_path = scratch.file("dataset.jsonl", dataset);
    }
};

}  // namespace

TEST_CASE("bench writes results, summary, and csv") {
    BenchFiles files;
    const auto results = files.scratch.path("results.jsonl");
    const auto summary = files.scratch.path("summary.json");

    const auto result = run_cli("bench " + files.dataset_path + " --config " +
                                files.config_path + " --results-out " + results +
                                " --summary-out " + summary + " --csv");
    CHECK(result.code == 0);
    CHECK(result.out.find("accuracy") != std::string::npos);
    CHECK(result.out.find("0.75") != std::string::npos);

    std::istringstream lines(slurp(results));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        CHECK(json::parse(line).contains("correct"));
        ++rows;
    }
    CHECK(rows == 4);

    const auto s = json::parse(slurp(summary));
    CHECK(s["n"] == 4);
    CHECK(s["accuracy"] == 0.75);
    const auto csv = slurp(files.scratch.path("summary.csv"));
    CHECK(csv.find("n,accuracy,avg_steps") == 0);

    const auto rerun_results = files.scratch.path("results2.jsonl");
    const auto rerun = run_cli("bench " + files.dataset_path + " --config " +
                               files.config_path + " --results-out " +
                               rerun_results + " --summary-out " +
                               files.scratch.path("summary2.json"));
    CHECK(rerun.code == 0);
    CHECK(slurp(rerun_results) == slurp(results));
}

TEST_CASE("bench supports ablations and the mislead flag") {
    BenchFiles files;
    const auto summary = files.scratch.path("summary.json");

    const auto ablated = run_cli("bench " + files.dataset_path + " --config " +
                                 files.config_path + " --ablation no_actions" +
                                 " --results-out " +
                                 files.scratch.path("results.jsonl") +
                                 " --summary-out " + summary);
    CHECK(ablated.code == 0);
    const auto s = json::parse(slurp(summary));
    CHECK(s["ablations"]["no_actions"] == true);
    CHECK(s["avg_embed_calls"] == 0.0);

    const auto misled = run_cli("bench " + files.dataset_path + " --config " +
                                files.config_path + " --mislead --results-out " +
                                files.scratch.path("results3.jsonl") +
                                " --summary-out " +
                                files.scratch.path("summary3.json"));
    CHECK(misled.code == 0);
    const auto s3 = json::parse(slurp(files.scratch.path("summary3.json")));
    CHECK(s3["mislead_rate"] == 0.0);
    CHECK(misled.out.find("mislead_rate") != std::string::npos);

    const auto conflicted =
        run_cli("bench " + files.dataset_path + " --config " + files.config_path +
                " --mislead --ablation no_verification --results-out " +
                files.scratch.path("r4.jsonl") + " --summary-out " +
                files.scratch.path("s4.json"));
    CHECK(conflicted.code == 2);

    const auto invalid = run_cli("bench " + files.dataset_path + " --ablation bogus");
    CHECK(invalid.code != 0);
}

TEST_CASE("bench rejects malformed datasets with the offending line") {
    BenchFiles files;
    const auto bad = files.scratch.file(
        "bad.jsonl",
        R"({"id":"a","question":"Q?","answers":["x"]})" "\nnot json\n");

    const auto result = run_cli("bench " + bad + " --config " + files.config_path);
    CHECK(result.code == 2);
    CHECK(result.err.find("line 2") != std::string::npos);
}
