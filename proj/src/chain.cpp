#include "coa/chain.hpp"

#include <array>
#include <sstream>

#include "coa/errors.hpp"
#include "coa/util.hpp"

namespace coa {

namespace {

constexpr std::string_view kNodeHeaderPrefix = "[Node ";
constexpr std::string_view kActionPrefix = "Action:";
constexpr std::string_view kSubPrefix = "Sub:";
constexpr std::string_view kGuessMarker = "[Guess Answer]";
constexpr std::string_view kUnsolvedMarker = "[Unsolved Sub]";

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

bool is_node_header(const std::string& trimmed) {
    if (!trimmed.starts_with(kNodeHeaderPrefix) || !trimmed.ends_with(']'))
        return false;
    const auto body = trimmed.substr(kNodeHeaderPrefix.size(),
                                     trimmed.size() - kNodeHeaderPrefix.size() - 1);
    if (body.empty()) return false;
    for (char c : body)
        if (c < '0' || c > '9') return false;
    return true;
}

}  // namespace

std::string to_string(ActionType action) {
    switch (action) {
        case ActionType::WebQuery: return "web-querying";
        case ActionType::KnowledgeEncode: return "knowledge-encoding";
        case ActionType::DataAnalyze: return "data-analyzing";
    }
    throw InvalidInputError("unknown action type");
}

std::string to_string(SourceKind kind) {
    switch (kind) {
        case SourceKind::Web: return "web";
        case SourceKind::Knowledge: return "knowledge";
        case SourceKind::Data: return "data";
    }
    throw InvalidInputError("unknown source kind");
}

ActionType action_from_string(std::string_view name) {
    const std::string key = to_lower(trim(name));
    if (key == "web-querying") return ActionType::WebQuery;
    if (key == "knowledge-encoding") return ActionType::KnowledgeEncode;
    if (key == "data-analyzing") return ActionType::DataAnalyze;
    throw ParseError("unknown action name: " + std::string(trim(name)));
}

std::vector<std::pair<ActionType, std::string>> default_action_catalog() {
    return {
        {ActionType::WebQuery,
         "search the web for the sub-question and read the most relevant pages"},
        {ActionType::KnowledgeEncode,
         "retrieve the most relevant passages from the local knowledge store"},
        {ActionType::DataAnalyze,
         "look up matching entries in the structured data source"},
    };
}

PromptText build_chain_prompt(
    const std::string& question,
    const std::vector<std::pair<ActionType, std::string>>& action_catalog) {
    if (trim(question).empty()) throw InvalidInputError("question must be nonempty");

    std::array<int, 3> seen{};
    for (const auto& [action, desc] : action_catalog)
        ++seen[static_cast<std::size_t>(action)];
    if (seen != std::array<int, 3>{1, 1, 1})
        throw InvalidCatalogError("catalog must contain each action exactly once");

    std::ostringstream out;
    out << "Construct an action reasoning chain for the question: \"" << question
        << "\"\n\n";
    out << "Break the question into sub-questions and assign each one the single "
           "most suitable action:\n";
    for (const auto& [action, desc] : action_catalog)
        out << "- " << to_string(action) << ": " << desc << "\n";
    out << "\nWrite the chain in exactly this format, one block per node, with "
           "nodes numbered from 1:\n";
    out << "[Node 1]\n"
           "Action: web-querying|knowledge-encoding|data-analyzing\n"
           "Sub: the sub-question\n"
           "[Guess Answer] your best answer\n\n";
    out << "If you can answer a sub-question yourself, put the answer on a line "
           "starting with \"[Guess Answer]\". If you cannot, write the single "
           "line \"[Unsolved Sub]\" instead.\n";

    PromptText prompt;
    prompt.text = out.str();
    prompt.role_messages = {
        {"system",
         "You decompose questions into action reasoning chains and reply only "
         "in the requested format."},
        {"user", prompt.text},
    };
    return prompt;
}

ActionChain parse_chain(const std::string& llm_output, const std::string& question) {
    const auto lines = split_lines(llm_output);

    ActionChain chain;
    chain.question = question;

    std::size_t i = 0;
    while (i < lines.size() && !is_node_header(trim(lines[i]))) ++i;

    while (i < lines.size()) {
        ++i;  // consume the header

        std::optional<ActionType> action;
        std::optional<std::string> sub;
        std::optional<std::string> guess;
        bool has_guess_marker = false;
        bool has_unsolved_marker = false;

        for (; i < lines.size(); ++i) {
            const std::string line = trim(lines[i]);
            if (is_node_header(line)) break;
            if (line.empty()) continue;
            if (!action && line.starts_with(kActionPrefix)) {
                try {
                    action = action_from_string(line.substr(kActionPrefix.size()));
                } catch (const ParseError&) {
                    throw ParseError("unknown action name in line \"" + line + "\"",
                                     llm_output);
                }
            } else if (action && !sub && line.starts_with(kSubPrefix)) {
                sub = trim(line.substr(kSubPrefix.size()));
            } else if (sub && line.starts_with(kGuessMarker)) {
                if (has_unsolved_marker)
                    throw ParseError("node has both answer markers", llm_output);
                has_guess_marker = true;
                guess = trim(line.substr(kGuessMarker.size()));
            } else if (sub && line == kUnsolvedMarker) {
                if (has_guess_marker)
                    throw ParseError("node has both answer markers", llm_output);
                has_unsolved_marker = true;
            }
        }

        if (!action || !sub || sub->empty() || !(has_guess_marker || has_unsolved_marker))
            continue;  // incomplete block: ignore it

        ActionNode node;
        node.index = chain.nodes.size() + 1;
        node.action = *action;
        node.sub_question = *sub;
        if (has_guess_marker && !guess->empty()) {
            node.missing_flag = false;
            node.guess_answer = guess;
        } else {
            node.missing_flag = true;
        }
        chain.nodes.push_back(std::move(node));
    }

    if (chain.nodes.empty())
        throw ParseError("no well-formed nodes in model output", llm_output);
    return chain;
}

std::string serialize_chain(const ActionChain& chain) {
    std::ostringstream out;
    for (const auto& node : chain.nodes) {
        out << "[Node " << node.index << "]\n";
        out << "Action: " << to_string(node.action) << "\n";
        out << "Sub: " << node.sub_question << "\n";
        if (!node.missing_flag && node.guess_answer)
            out << kGuessMarker << " " << *node.guess_answer << "\n";
        else
            out << kUnsolvedMarker << "\n";
    }
    return out.str();
}

PromptText build_final_prompt(const ActionChain& processed, const std::string& question) {
    for (const auto& node : processed.nodes)
        if (!node.resolved_answer || node.resolved_answer->empty())
            throw ChainNotProcessedError("node " + std::to_string(node.index) +
                                         " has no resolved answer");

    std::ostringstream out;
    out << "Answer the question using the solved sub-questions below.\n\n";
    out << "Question: \"" << question << "\"\n\n";
    for (const auto& node : processed.nodes) {
        out << "Sub-question " << node.index << ": " << node.sub_question << "\n";
        out << "Answer " << node.index << ": " << *node.resolved_answer << "\n";
    }
    out << "\nReply with the final answer only, starting with \""
        << kFinalContentMarker << "\".\n";

    PromptText prompt;
    prompt.text = out.str();
    prompt.role_messages = {
        {"system",
         "You answer questions from solved sub-questions and reply only in the "
         "requested format."},
        {"user", prompt.text},
    };
    return prompt;
}

}  // namespace coa
