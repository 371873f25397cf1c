#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coa/retrieved.hpp"
#include "coa/scoring.hpp"

namespace coa {

/// The three retrieval actions a node can be assigned.
enum class ActionType { WebQuery, KnowledgeEncode, DataAnalyze };

/// Canonical lowercase name used in the chain markup ("web-querying",
/// "knowledge-encoding", "data-analyzing").
std::string to_string(ActionType action);

/// Parses a canonical action name (case-insensitive, surrounding whitespace
/// ignored). Throws ParseError on anything else.
ActionType action_from_string(std::string_view name);

/// One step of an action chain: a sub-question, the action chosen to solve
/// it, and the model's guess answer when it has one. `evidence`,
/// `verification` and `resolved_answer` are filled in by the executor.
struct ActionNode {
    std::size_t index = 1;
    ActionType action = ActionType::WebQuery;
    std::string sub_question;
    bool missing_flag = false;
    std::optional<std::string> guess_answer;
    std::vector<RetrievedItem> evidence;
    std::optional<VerificationOutcome> verification;
    std::optional<std::string> resolved_answer;

    bool operator==(const ActionNode&) const = default;
};

/// A question decomposed into an ordered list of nodes with contiguous
/// 1-based indices.
struct ActionChain {
    std::string question;
    std::vector<ActionNode> nodes;

    bool operator==(const ActionChain&) const = default;
};

/// A prompt both as flat text and as role-tagged messages for chat backends.
struct PromptText {
    std::string text;
    std::vector<std::pair<std::string, std::string>> role_messages;
};

/// The default (action, description) catalog handed to build_chain_prompt.
std::vector<std::pair<ActionType, std::string>> default_action_catalog();

/// Builds the decomposition prompt: the question verbatim, one description
/// line per action, the node markup grammar, and the answer-marker
/// instructions. Throws InvalidInputError on an empty question and
/// InvalidCatalogError unless the catalog holds each action exactly once.
PromptText build_chain_prompt(
    const std::string& question,
    const std::vector<std::pair<ActionType, std::string>>& action_catalog);

/// Parses the node markup out of a model reply. Junk before the first node
/// and unparseable trailing content are ignored as long as one well-formed
/// node was read; zero nodes, an unknown action name, or a node carrying
/// both answer markers raise ParseError.
ActionChain parse_chain(const std::string& llm_output, const std::string& question);

/// Renders a chain in the canonical markup; parse_chain inverts it exactly.
std::string serialize_chain(const ActionChain& chain);

/// Builds the reanswer prompt from a fully processed chain: the question,
/// each sub-question with its resolved answer in node order, and the
/// instruction to start the reply with "[Final Content]". Throws
/// ChainNotProcessedError if any node lacks a resolved answer.
PromptText build_final_prompt(const ActionChain& processed, const std::string& question);

/// Marker every final reply must start with; the engine strips it.
inline constexpr std::string_view kFinalContentMarker = "[Final Content]";

}  // namespace coa
