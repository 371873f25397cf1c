#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coa/executor.hpp"

namespace coa {

struct QARecord {
    std::string id;
    std::string question;
    std::vector<std::string> gold_answers;

    bool operator==(const QARecord&) const = default;
};

/// Loads a JSONL dataset: one {"id", "question", "answers": [...]} object
/// per line, blank lines skipped. Duplicate ids, missing or empty fields,
/// and unparseable lines raise DatasetLoadError naming the line.
std::vector<QARecord> load_dataset(const std::string& path);

/// Lowercases, deletes ASCII punctuation, and collapses whitespace runs to
/// single spaces. Bytes >= 0x80 pass through unchanged.
std::string normalize_answer(const std::string& text);

/// True when the normalized generated answer contains any normalized gold
/// answer as a substring.
bool cover_em(const std::string& generated,
              const std::vector<std::string>& gold_answers);

struct QuestionResult {
    std::string id;
    std::string final_answer;
    bool correct = false;
    // Absent when the question failed; such records score as incorrect and
    // are excluded from the step and call averages.
    std::optional<std::size_t> steps;
    std::optional<std::uint64_t> chat_calls;
    std::optional<std::uint64_t> embed_calls;
    std::optional<std::string> error;

    bool operator==(const QuestionResult&) const = default;
};

struct Metrics {
    std::size_t n = 0;
    double accuracy = 0.0;
    double avg_steps = 0.0;  // over successful runs; 0 when none succeeded
    std::optional<double> mislead_rate;
    double avg_chat_calls = 0.0;  // over successful runs
    double avg_embed_calls = 0.0;

    bool operator==(const Metrics&) const = default;
};

struct BenchReport {
    Metrics metrics;
    std::vector<QuestionResult> results;  // sorted by record id
    Ablations ablations;
    bool aborted = false;
    std::optional<std::string> abort_reason;
};

/// Runs every record through the pipeline and scores final answers with
/// cover_em. Failed questions count as incorrect. A backend outage stops the
/// run early: records finished before the outage are kept, `aborted` is set,
/// and the metrics cover only those records.
BenchReport evaluate(const std::vector<QARecord>& records,
                     const EngineDeps& deps, const RunConfig& cfg,
                     std::size_t max_workers = 1);

/// Fraction of records whose answer is correct with verification disabled
/// but incorrect with it enabled, holding the generated chain fixed per
/// record. Requires a cfg with verification on; a backend outage propagates
/// as BackendUnavailableError since a ratio has no partial form.
double mislead_rate(const std::vector<QARecord>& records,
                    const EngineDeps& deps, const RunConfig& cfg,
                    std::size_t max_workers = 1);

/// One JSON object per result line: id, final_answer, correct, steps,
/// chat_calls, embed_calls (the last three null for failed records).
void write_results_jsonl(const BenchReport& report, const std::string& path);

void write_summary_json(const BenchReport& report, const std::string& path);

/// Single-row CSV of the metrics; mislead_rate is left empty when unset.
void write_summary_csv(const BenchReport& report, const std::string& path);

/// Renders the metrics as an aligned two-column table for terminal output.
std::string format_metrics(const Metrics& metrics);

}  // namespace coa
