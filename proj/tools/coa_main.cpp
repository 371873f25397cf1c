#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "coa/bench.hpp"
#include "coa/config.hpp"
#include "coa/errors.hpp"

namespace fs = std::filesystem;
using namespace coa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitQuestionFailed = 3;
constexpr int kExitBackendUnavailable = 4;

EngineConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) {
        EngineConfig config;
        apply_env_overrides(config);
        config.validate();
        return config;
    }
    return load_config(config_path);
}

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const QuestionFailedError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitQuestionFailed;
    } catch (const BackendUnavailableError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBackendUnavailable;
    } catch (const BackendRejectedError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBackendUnavailable;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

std::string one_line(std::string text) {
    std::replace(text.begin(), text.end(), '\n', ' ');
    while (!text.empty() && text.back() == ' ')
        text.pop_back();
    return text;
}

void print_chain(const Trace& trace, std::ostream& out) {
    const auto count = std::min(trace.chain_after.nodes.size(),
                                trace.per_node_events.size());
    for (std::size_t i = 0; i < count; ++i) {
        const auto& node = trace.chain_after.nodes[i];
        const auto& event = trace.per_node_events[i];
        out << '[' << node.index << "] " << to_string(node.action) << " sub=\""
            << node.sub_question << '"';
        if (event.mrfs)
            out << " mrfs=" << *event.mrfs;
        if (event.imputed)
            out << " imputed";
        if (event.corrected)
            out << " corrected";
        if (event.low_confidence)
            out << " low-confidence";
        out << " answer=\"" << one_line(node.resolved_answer.value_or("")) << "\"\n";
    }
}

int cmd_ask(const std::string& question, const std::string& config_path,
            const std::string& trace_out, bool show_chain) {
    const auto config = load_or_default(config_path);
    const auto engine = build_engine(config);
    const auto answer = run_question(question, engine.deps(), config.run_config());

    if (!trace_out.empty())
        write_trace(answer.trace, trace_out);
    if (show_chain)
        print_chain(answer.trace, std::cout);
    std::cout << answer.text << '\n';
    return kExitOk;
}

int cmd_index(const std::string& dir, const std::string& store_path,
              const std::string& config_path) {
    auto config = load_or_default(config_path);
    config.store_path.clear();  // --store names the output, not an input
    const auto engine = build_engine(config);

    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw IoError("not a readable directory: " + dir);

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file())
            continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".txt" || ext == ".md")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    VectorStore store;
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw IoError("cannot read file: " + path.string());
        std::ostringstream buffer;
        buffer << in.rdbuf();
        const auto chunks =
            chunk_document(buffer.str(), config.chunk_size, config.chunk_overlap);
        if (chunks.empty())
            continue;
        const auto doc_id = fs::relative(path, dir).generic_string();
        store.upsert_chunks(doc_id, chunks, *engine.embedder);
    }

    if (files.empty())
        std::cerr << "warning: no .txt or .md files under " << dir << '\n';
    save_store(store, store_path);
    std::cout << "indexed " << store.size() << " chunks from " << files.size()
              << " files into " << store_path << '\n';
    return kExitOk;
}

std::string csv_sibling(const std::string& summary_path) {
    const std::string suffix = ".json";
    if (summary_path.size() > suffix.size() &&
        summary_path.compare(summary_path.size() - suffix.size(), suffix.size(),
                             suffix) == 0)
        return summary_path.substr(0, summary_path.size() - suffix.size()) + ".csv";
    return summary_path + ".csv";
}

int cmd_bench(const std::string& dataset_path, const std::string& config_path,
              bool mislead, const std::string& ablation,
              const std::string& results_out, const std::string& summary_out,
              bool csv) {
    auto config = load_or_default(config_path);
    if (ablation == "no_actions")
        config.ablations.no_actions = true;
    else if (ablation == "no_verification")
        config.ablations.no_verification = true;
    else if (ablation == "no_imputation")
        config.ablations.no_imputation = true;

    const auto engine = build_engine(config);
    const auto records = load_dataset(dataset_path);
    if (records.empty())
        throw DatasetLoadError("dataset has no records: " + dataset_path);

    const auto cfg = config.run_config();
    auto report = evaluate(records, engine.deps(), cfg, config.bench_workers);
    if (mislead && !report.aborted)
        report.metrics.mislead_rate =
            mislead_rate(records, engine.deps(), cfg, config.bench_workers);

    write_results_jsonl(report, results_out);
    write_summary_json(report, summary_out);
    if (csv)
        write_summary_csv(report, csv_sibling(summary_out));

    std::cout << format_metrics(report.metrics);
    if (report.aborted) {
        std::cerr << "warning: run aborted early: "
                  << report.abort_reason.value_or("backend unavailable") << '\n';
        return kExitBackendUnavailable;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chain-of-action question answering engine"};
    app.require_subcommand(1);

    auto* ask = app.add_subcommand("ask", "answer a single question");
    std::string ask_question;
    std::string ask_config;
    std::string ask_trace_out;
    bool ask_show_chain = false;
    ask->add_option("question", ask_question, "the question to answer")->required();
    ask->add_option("--config", ask_config, "config file path");
    ask->add_option("--trace-out", ask_trace_out, "write the run trace JSON here");
    ask->add_flag("--show-chain", ask_show_chain,
                  "print the processed chain before the answer");

    auto* index = app.add_subcommand("index", "embed documents into a store file");
    std::string index_dir;
    std::string index_store;
    std::string index_config;
    index->add_option("dir", index_dir, "directory of .txt / .md documents")
        ->required();
    index->add_option("--store", index_store, "output store path")->required();
    index->add_option("--config", index_config, "config file path");

    auto* bench = app.add_subcommand("bench", "evaluate a JSONL question dataset");
    std::string bench_dataset;
    std::string bench_config;
    std::string bench_ablation;
    std::string bench_results_out = "results.jsonl";
    std::string bench_summary_out = "summary.json";
    bool bench_mislead = false;
    bool bench_csv = false;
    bench->add_option("dataset", bench_dataset, "dataset JSONL path")->required();
    bench->add_option("--config", bench_config, "config file path");
    bench->add_flag("--mislead", bench_mislead, "also measure the mislead rate");
    bench
        ->add_option("--ablation", bench_ablation,
                     "disable one pipeline stage for the whole run")
        ->check(CLI::IsMember({"no_actions", "no_verification", "no_imputation"}));
    bench->add_option("--results-out", bench_results_out, "per-question JSONL path");
    bench->add_option("--summary-out", bench_summary_out, "metrics JSON path");
    bench->add_flag("--csv", bench_csv, "also export the summary as CSV");

    CLI11_PARSE(app, argc, argv);

    if (ask->parsed())
        return run_guarded([&] {
            return cmd_ask(ask_question, ask_config, ask_trace_out, ask_show_chain);
        });
    if (index->parsed())
        return run_guarded(
            [&] { return cmd_index(index_dir, index_store, index_config); });
    return run_guarded([&] {
        return cmd_bench(bench_dataset, bench_config, bench_mislead, bench_ablation,
                         bench_results_out, bench_summary_out, bench_csv);
    });
}
