#include "coa/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <unordered_set>

#include "coa/errors.hpp"
#include "coa/util.hpp"

namespace coa {

namespace {

using nlohmann::json;

QARecord record_from_line(const json& j, std::size_t line_no) {
    if (!j.is_object())
        throw DatasetLoadError("expected a JSON object", line_no);
    QARecord record;
    try {
        record.id = j.at("id").get<std::string>();
        record.question = j.at("question").get<std::string>();
        const auto& answers = j.at("answers");
        if (!answers.is_array() || answers.empty())
            throw DatasetLoadError("\"answers\" must be a nonempty array", line_no);
        for (const auto& answer : answers) {
            auto text = answer.get<std::string>();
            if (text.empty())
                throw DatasetLoadError("empty gold answer", line_no);
            record.gold_answers.push_back(std::move(text));
        }
    } catch (const json::exception& e) {
        throw DatasetLoadError(e.what(), line_no);
    }
    if (record.id.empty())
        throw DatasetLoadError("empty record id", line_no);
    if (record.question.empty())
        throw DatasetLoadError("empty question", line_no);
    return record;
}

Metrics compute_metrics(const std::vector<QuestionResult>& results) {
    Metrics metrics;
    metrics.n = results.size();
    if (results.empty())
        return metrics;

    std::size_t correct = 0;
    std::size_t succeeded = 0;
    double steps = 0.0;
    double chat = 0.0;
    double embed = 0.0;
    for (const auto& result : results) {
        correct += result.correct ? 1 : 0;
        if (result.steps) {
            ++succeeded;
            steps += static_cast<double>(*result.steps);
            chat += static_cast<double>(*result.chat_calls);
            embed += static_cast<double>(*result.embed_calls);
        }
    }
    metrics.accuracy = static_cast<double>(correct) / static_cast<double>(metrics.n);
    if (succeeded > 0) {
        metrics.avg_steps = steps / static_cast<double>(succeeded);
        metrics.avg_chat_calls = chat / static_cast<double>(succeeded);
        metrics.avg_embed_calls = embed / static_cast<double>(succeeded);
    }
    return metrics;
}

json result_to_json(const QuestionResult& result) {
    json j;
    j["id"] = result.id;
    j["final_answer"] = result.final_answer;
    j["correct"] = result.correct;
    j["steps"] = result.steps ? json(*result.steps) : json(nullptr);
    j["chat_calls"] = result.chat_calls ? json(*result.chat_calls) : json(nullptr);
    j["embed_calls"] = result.embed_calls ? json(*result.embed_calls) : json(nullptr);
    return j;
}

std::string number_text(double value) { return json(value).dump(); }

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out.is_open())
        throw IoError("cannot open file for writing: " + path);
    return out;
}

void finish_write(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out.good())
        throw IoError("failed while writing file: " + path);
}

}  // namespace

std::vector<QARecord> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open())
        throw IoError("cannot open dataset file: " + path);

    std::vector<QARecord> records;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DatasetLoadError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        auto record = record_from_line(j, line_no);
        if (!seen_ids.insert(record.id).second)
            throw DatasetLoadError("duplicate record id \"" + record.id + "\"", line_no);
        records.push_back(std::move(record));
    }
    return records;
}

std::string normalize_answer(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (const char c : text) {
        const auto b = static_cast<unsigned char>(c);
        if (std::isalnum(b) || b >= 0x80) {
            if (pending_space && !out.empty())
                out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(b)));
        } else if (std::isspace(b)) {
            pending_space = true;
        }
    }
    return out;
}

bool cover_em(const std::string& generated,
              const std::vector<std::string>& gold_answers) {
    if (gold_answers.empty())
        throw InvalidInputError("gold_answers must be nonempty");
    const auto haystack = normalize_answer(generated);
    return std::any_of(gold_answers.begin(), gold_answers.end(),
                       [&](const std::string& gold) {
                           return haystack.find(normalize_answer(gold)) !=
                                  std::string::npos;
                       });
}

BenchReport evaluate(const std::vector<QARecord>& records,
                     const EngineDeps& deps, const RunConfig& cfg,
                     std::size_t max_workers) {
    if (records.empty())
        throw InvalidInputError("records must be nonempty");
    if (max_workers == 0)
        throw InvalidInputError("max_workers must be at least 1");
    cfg.validate();

    std::vector<std::optional<QuestionResult>> slots(records.size());
    std::atomic<bool> unavailable{false};
    std::mutex abort_mutex;
    std::string abort_reason;

    parallel_for(records.size(), max_workers, [&](std::size_t i) {
        if (unavailable.load())
            return;
        const auto& record = records[i];
        QuestionResult result;
        result.id = record.id;
        try {
            const auto answer = run_question(record.question, deps, cfg);
            result.final_answer = answer.text;
            result.correct = cover_em(answer.text, record.gold_answers);
            result.steps = answer.trace.chain_after.nodes.size();
            result.chat_calls = answer.trace.usage.chat_calls;
            result.embed_calls = answer.trace.usage.embed_calls;
        } catch (const BackendUnavailableError& e) {
            bool expected = false;
            if (unavailable.compare_exchange_strong(expected, true)) {
                const std::lock_guard<std::mutex> lock(abort_mutex);
                abort_reason = e.what();
            }
            return;
        } catch (const QuestionFailedError& e) {
            result.error = e.what();
        }
        slots[i] = std::move(result);
    });

    BenchReport report;
    report.ablations = cfg.ablations;
    for (auto& slot : slots)
        if (slot)
            report.results.push_back(std::move(*slot));
    std::sort(report.results.begin(), report.results.end(),
              [](const QuestionResult& a, const QuestionResult& b) {
                  return a.id < b.id;
              });
    report.aborted = unavailable.load();
    if (report.aborted)
        report.abort_reason = abort_reason;
    report.metrics = compute_metrics(report.results);
    return report;
}

double mislead_rate(const std::vector<QARecord>& records,
                    const EngineDeps& deps, const RunConfig& cfg,
                    std::size_t max_workers) {
    if (records.empty())
        throw InvalidInputError("records must be nonempty");
    if (max_workers == 0)
        throw InvalidInputError("max_workers must be at least 1");
    cfg.validate();
    if (cfg.ablations.no_verification)
        throw PreconditionError("mislead rate requires verification to be enabled");

    RunConfig unverified = cfg;
    unverified.ablations.no_verification = true;

    std::atomic<std::size_t> flips{0};
    parallel_for(records.size(), max_workers, [&](std::size_t i) {
        const auto& record = records[i];
        try {
            const auto off = run_question(record.question, deps, unverified);
            const auto on = run_question_with_chain(
                record.question, off.trace.raw_chain_text, deps, cfg);
            if (cover_em(off.text, record.gold_answers) &&
                !cover_em(on.text, record.gold_answers))
                flips.fetch_add(1);
        } catch (const QuestionFailedError&) {
            // an unanswerable record cannot be misled
        }
    });
    return static_cast<double>(flips.load()) /
           static_cast<double>(records.size());
}

void write_results_jsonl(const BenchReport& report, const std::string& path) {
    auto out = open_for_write(path);
    for (const auto& result : report.results)
        out << result_to_json(result).dump() << '\n';
    finish_write(out, path);
}

void write_summary_json(const BenchReport& report, const std::string& path) {
    const auto& m = report.metrics;
    json j;
    j["n"] = m.n;
    j["accuracy"] = m.accuracy;
    j["avg_steps"] = m.avg_steps;
    j["mislead_rate"] = m.mislead_rate ? json(*m.mislead_rate) : json(nullptr);
    j["avg_chat_calls"] = m.avg_chat_calls;
    j["avg_embed_calls"] = m.avg_embed_calls;
    j["aborted"] = report.aborted;
    if (report.abort_reason)
        j["abort_reason"] = *report.abort_reason;
    j["ablations"] = {{"no_actions", report.ablations.no_actions},
                      {"no_verification", report.ablations.no_verification},
                      {"no_imputation", report.ablations.no_imputation}};

    auto out = open_for_write(path);
    out << j.dump(2) << '\n';
    finish_write(out, path);
}

void write_summary_csv(const BenchReport& report, const std::string& path) {
    const auto& m = report.metrics;
    auto out = open_for_write(path);
    out << "n,accuracy,avg_steps,mislead_rate,avg_chat_calls,avg_embed_calls\n";
    out << m.n << ',' << number_text(m.accuracy) << ','
        << number_text(m.avg_steps) << ','
        << (m.mislead_rate ? number_text(*m.mislead_rate) : std::string()) << ','
        << number_text(m.avg_chat_calls) << ','
        << number_text(m.avg_embed_calls) << '\n';
    finish_write(out, path);
}

std::string format_metrics(const Metrics& metrics) {
    std::ostringstream out;
    const auto row = [&out](const char* label, const std::string& value) {
        out << std::left << std::setw(18) << label << value << '\n';
    };
    row("questions", std::to_string(metrics.n));
    row("accuracy", number_text(metrics.accuracy));
    row("avg_steps", number_text(metrics.avg_steps));
    if (metrics.mislead_rate)
        row("mislead_rate", number_text(*metrics.mislead_rate));
    row("avg_chat_calls", number_text(metrics.avg_chat_calls));
    row("avg_embed_calls", number_text(metrics.avg_embed_calls));
    return out.str();
}

}  // namespace coa
