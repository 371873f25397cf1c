#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coa/actions.hpp"
#include "coa/backends.hpp"
#include "coa/chain.hpp"
#include "coa/scoring.hpp"
#include "coa/vectorstore.hpp"

namespace coa {

/// Pipeline stages that can be switched off for comparison runs.
struct Ablations {
    bool no_actions = false;
    bool no_verification = false;
    bool no_imputation = false;

    bool operator==(const Ablations&) const = default;
};

/// Everything a single run needs to know.
struct RunConfig {
    std::size_t top_k = 3;
    std::size_t top_m = 8;
    double sim_threshold = 0.8;
    double threshold_T = 0.5;
    Weights weights;
    double awl_cap = kDefaultAwlCap;
    std::size_t ref_token_cap = 512;
    ChatParams chat_params;
    Ablations ablations;
    std::size_t max_parallel_nodes = 1;

    void validate() const;

    ActionConfig action_config() const { return {top_m, top_k, sim_threshold}; }
};

/// What happened at one node: how much was retrieved and how the answer was
/// settled. low_confidence marks nodes that fell back to the guess or to
/// "unknown" without evidence.
struct NodeEvent {
    std::size_t node_index = 0;
    ActionType action = ActionType::WebQuery;
    std::size_t items_retrieved = 0;
    std::optional<double> mrfs;
    bool corrected = false;
    bool imputed = false;
    bool low_confidence = false;

    bool operator==(const NodeEvent&) const = default;
};

/// Full record of one run: the raw model output, the chain before and after
/// processing, one event per node, and usage counts for this run alone.
struct Trace {
    std::string question;
    std::string raw_chain_text;
    std::size_t chain_retries = 0;
    ActionChain chain_before;
    ActionChain chain_after;
    std::vector<NodeEvent> per_node_events;
    UsageCounters usage;
    double wall_time_ms = 0.0;
};

/// The answer returned to the caller. text is nonempty and never starts
/// with the "[Final Content]" marker.
struct FinalAnswer {
    std::string text;
    Trace trace;
};

/// Shared services a run executes against. search_client, store, and
/// data_source may be null; actions needing them degrade.
struct EngineDeps {
    ChatBackend& chat;
    EmbeddingBackend& embedder;
    std::shared_ptr<SearchClient> search_client;
    std::shared_ptr<const VectorStore> store;
    std::shared_ptr<const DataSource> data_source;
};

/// A processed copy of the node plus its event.
struct ProcessedNode {
    ActionNode node;
    NodeEvent event;
};

/// Appended to the conversation when the chain reply fails to parse; the
/// model gets exactly one retry.
inline constexpr std::string_view kFormatReminder =
    "Your previous reply did not follow the required format. Reply again with "
    "only the node blocks, exactly in the format described above.";

/// Runs the node's action, verifies or imputes the guess, and returns the
/// node with evidence, verification, and resolved_answer filled in.
/// Retrieval failures degrade: the node resolves to its guess (or
/// "unknown") and the event is flagged low-confidence. Never throws for
/// retrieval reasons; backend failures propagate.
ProcessedNode process_node(const ActionNode& node, const ActionSet& actions,
                           const RunConfig& cfg);

/// Answers a question end to end: one chat call to generate the chain (one
/// retried call after a parse failure), node processing up to
/// max_parallel_nodes concurrently, and one chat call for the final answer.
/// Every successful run costs exactly 2 chat calls (3 with the retry).
/// Throws QuestionFailedError when the chain fails to parse twice;
/// BackendUnavailableError propagates.
FinalAnswer run_question(const std::string& question, const EngineDeps& deps,
                         const RunConfig& cfg);

/// Same pipeline, but starting from already-generated chain markup instead
/// of a chat call (costs 1 chat call). Throws QuestionFailedError when the
/// markup does not parse.
FinalAnswer run_question_with_chain(const std::string& question,
                                    const std::string& raw_chain_text,
                                    const EngineDeps& deps, const RunConfig& cfg);

/// Serializes a trace as a versioned JSON document ("trace_version" field).
std::string trace_to_json(const Trace& trace);

/// Writes trace_to_json to a file. Throws IoError when the path is not
/// writable.
void write_trace(const Trace& trace, const std::string& path);

}  // namespace coa
