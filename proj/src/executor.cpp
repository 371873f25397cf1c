#include "coa/executor.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "coa/errors.hpp"
#include "coa/util.hpp"

namespace coa {

namespace {

using nlohmann::json;

/// Per-run counting views over the shared backends. The inner backend's own
/// counters still advance; these isolate one run's share.
class ForwardingChatBackend : public ChatBackend {
public:
    explicit ForwardingChatBackend(ChatBackend& inner) : inner_(inner) {}

protected:
    std::string complete_impl(const MessageList& messages,
                              const ChatParams& params) override {
        return inner_.chat_complete(messages, params);
    }

private:
    ChatBackend& inner_;
};

class ForwardingEmbeddingBackend : public EmbeddingBackend {
public:
    explicit ForwardingEmbeddingBackend(EmbeddingBackend& inner) : inner_(inner) {}

    std::size_t dim() const override { return inner_.dim(); }

protected:
    std::vector<EmbeddingVector> embed_impl(
        const std::vector<std::string>& texts) override {
        return inner_.embed_batch(texts);
    }

private:
    EmbeddingBackend& inner_;
};

std::string strip_final_marker(const std::string& reply) {
    std::string text = trim(reply);
    while (text.starts_with(kFinalContentMarker))
        text = trim(text.substr(kFinalContentMarker.size()));
    if (text.empty()) text = "unknown";
    return text;
}

ActionNode resolve_without_actions(const ActionNode& node, NodeEvent& event) {
    ActionNode out = node;
    if (node.guess_answer) {
        out.resolved_answer = node.guess_answer;
    } else {
        out.resolved_answer = "unknown";
        event.low_confidence = true;
    }
    return out;
}

json node_to_json(const ActionNode& node) {
    json j = {{"index", node.index},
              {"action", to_string(node.action)},
              {"sub_question", node.sub_question},
              {"missing_flag", node.missing_flag}};
    if (node.guess_answer) j["guess_answer"] = *node.guess_answer;
    if (node.resolved_answer) j["resolved_answer"] = *node.resolved_answer;
    if (node.verification) {
        const auto& v = *node.verification;
        j["verification"] = {{"mrfs", v.mrfs},
                             {"best_ref_index", v.best_ref_index},
                             {"corrected", v.corrected}};
        if (v.replacement) j["verification"]["replacement"] = *v.replacement;
    }
    j["evidence"] = json::array();
    for (const auto& item : node.evidence) {
        json e = {{"source", to_string(item.source)},
                  {"content", item.content},
                  {"similarity", item.similarity},
                  {"rank", item.rank}};
        if (item.title) e["title"] = *item.title;
        if (item.snippet) e["snippet"] = *item.snippet;
        j["evidence"].push_back(std::move(e));
    }
    return j;
}

json chain_to_json(const ActionChain& chain) {
    json nodes = json::array();
    for (const auto& node : chain.nodes) nodes.push_back(node_to_json(node));
    return {{"question", chain.question}, {"nodes", std::move(nodes)}};
}

}  // namespace

void RunConfig::validate() const {
    if (top_k < 1) throw InvalidInputError("top_k must be >= 1");
    if (top_m < top_k) throw InvalidInputError("top_m must be >= top_k");
    if (sim_threshold < 0.0 || sim_threshold > 1.0)
        throw InvalidInputError("sim_threshold must be in [0, 1]");
    if (threshold_T < 0.0 || threshold_T > 1.0)
        throw InvalidInputError("threshold_T must be in [0, 1]");
    if (awl_cap <= 0.0) throw InvalidInputError("awl_cap must be positive");
    if (ref_token_cap < 1) throw InvalidInputError("ref_token_cap must be >= 1");
    if (max_parallel_nodes < 1)
        throw InvalidInputError("max_parallel_nodes must be >= 1");
    weights.validate();
    chat_params.validate();
}

ProcessedNode process_node(const ActionNode& node, const ActionSet& actions,
                           const RunConfig& cfg) {
    ActionNode out = node;
    NodeEvent event;
    event.node_index = node.index;
    event.action = node.action;

    std::vector<RetrievedItem> items;
    const bool skip_retrieval = node.missing_flag && cfg.ablations.no_imputation;
    if (!skip_retrieval) {
        QuerySection qs = build_query_section(node.sub_question, node.guess_answer);
        try {
            items = actions.run(node.action, qs, node.missing_flag);
        } catch (const RetrievalFailedError&) {
            items.clear();
        }
    }
    out.evidence = items;
    event.items_retrieved = items.size();

    if (node.missing_flag) {
        if (!items.empty() && !cfg.ablations.no_imputation) {
            out.resolved_answer = items.front().content;
            event.imputed = true;
        } else {
            out.resolved_answer = "unknown";
            event.low_confidence = true;
        }
        return {std::move(out), event};
    }

    const std::string& guess = *node.guess_answer;
    if (items.empty()) {
        out.resolved_answer = guess;
        event.low_confidence = true;
    } else if (cfg.ablations.no_verification) {
        out.resolved_answer = guess;
    } else {
        std::vector<std::string> references;
        references.reserve(items.size());
        for (const auto& item : items)
            references.push_back(truncate_to_tokens(item.content, cfg.ref_token_cap));
        try {
            const auto outcome = verify_answer(guess, references, cfg.threshold_T,
                                               cfg.weights, cfg.awl_cap);
            out.verification = outcome;
            event.mrfs = outcome.mrfs;
            event.corrected = outcome.corrected;
            out.resolved_answer = outcome.corrected ? *outcome.replacement : guess;
        } catch (const EmptyCandidateError&) {
            out.resolved_answer = guess;
            event.low_confidence = true;
        }
    }
    return {std::move(out), event};
}

namespace {

FinalAnswer run_pipeline(const std::string& question, const EngineDeps& deps,
                         const RunConfig& cfg,
                         const std::optional<std::string>& cached_chain) {
    cfg.validate();
    if (trim(question).empty()) throw InvalidInputError("question must be nonempty");

    const auto start = std::chrono::steady_clock::now();

    ForwardingChatBackend chat(deps.chat);
    ForwardingEmbeddingBackend embedder(deps.embedder);
    const ActionSet actions(deps.search_client, deps.store, deps.data_source,
                            embedder, cfg.action_config());

    Trace trace;
    trace.question = question;

    ActionChain chain;
    if (cached_chain) {
        trace.raw_chain_text = *cached_chain;
        try {
            chain = parse_chain(*cached_chain, question);
        } catch (const ParseError& e) {
            throw QuestionFailedError("cached chain markup does not parse",
                                      e.raw_output());
        }
    } else {
        const auto prompt = build_chain_prompt(question, default_action_catalog());
        std::string raw = chat.chat_complete(prompt.role_messages, cfg.chat_params);
        try {
            chain = parse_chain(raw, question);
        } catch (const ParseError&) {
            trace.chain_retries = 1;
            MessageList retry = prompt.role_messages;
            retry.emplace_back("assistant", raw);
            retry.emplace_back("user", std::string(kFormatReminder));
            raw = chat.chat_complete(retry, cfg.chat_params);
            try {
                chain = parse_chain(raw, question);
            } catch (const ParseError& e) {
                throw QuestionFailedError(
                    "chain markup failed to parse after a format reminder",
                    e.raw_output());
            }
        }
        trace.raw_chain_text = raw;
    }
    trace.chain_before = chain;

    const std::size_t n = chain.nodes.size();
    std::vector<ActionNode> processed(n);
    std::vector<NodeEvent> events(n);
    if (cfg.ablations.no_actions) {
        for (std::size_t i = 0; i < n; ++i) {
            events[i].node_index = chain.nodes[i].index;
            events[i].action = chain.nodes[i].action;
            processed[i] = resolve_without_actions(chain.nodes[i], events[i]);
        }
    } else {
        parallel_for(n, cfg.max_parallel_nodes, [&](std::size_t i) {
            auto result = process_node(chain.nodes[i], actions, cfg);
            processed[i] = std::move(result.node);
            events[i] = result.event;
        });
    }
    trace.chain_after = ActionChain{question, std::move(processed)};
    trace.per_node_events = std::move(events);

    const auto final_prompt = build_final_prompt(trace.chain_after, question);
    const std::string final_raw =
        chat.chat_complete(final_prompt.role_messages, cfg.chat_params);

    FinalAnswer answer;
    answer.text = strip_final_marker(final_raw);

    trace.usage.chat_calls = chat.usage().chat_calls;
    trace.usage.embed_calls = embedder.usage().embed_calls;
    trace.usage.embed_texts = embedder.usage().embed_texts;
    trace.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  start)
            .count();

    answer.trace = std::move(trace);
    return answer;
}

}  // namespace

FinalAnswer run_question(const std::string& question, const EngineDeps& deps,
                         const RunConfig& cfg) {
    return run_pipeline(question, deps, cfg, std::nullopt);
}

FinalAnswer run_question_with_chain(const std::string& question,
                                    const std::string& raw_chain_text,
                                    const EngineDeps& deps, const RunConfig& cfg) {
    return run_pipeline(question, deps, cfg, raw_chain_text);
}

std::string trace_to_json(const Trace& trace) {
    json events = json::array();
    for (const auto& e : trace.per_node_events) {
        json j = {{"node_index", e.node_index},
                  {"action", to_string(e.action)},
                  {"items_retrieved", e.items_retrieved},
                  {"corrected", e.corrected},
                  {"imputed", e.imputed},
                  {"low_confidence", e.low_confidence}};
        if (e.mrfs) j["mrfs"] = *e.mrfs;
        events.push_back(std::move(j));
    }

    const json j = {{"trace_version", 1},
                    {"question", trace.question},
                    {"raw_chain_text", trace.raw_chain_text},
                    {"chain_retries", trace.chain_retries},
                    {"chain_before", chain_to_json(trace.chain_before)},
                    {"chain_after", chain_to_json(trace.chain_after)},
                    {"per_node_events", std::move(events)},
                    {"usage",
                     {{"chat_calls", trace.usage.chat_calls},
                      {"embed_calls", trace.usage.embed_calls},
                      {"embed_texts", trace.usage.embed_texts}}},
                    {"wall_time_ms", trace.wall_time_ms}};
    return j.dump(2);
}

void write_trace(const Trace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open trace file for writing: " + path);
    out << trace_to_json(trace) << '\n';
    if (!out) throw IoError("failed writing trace file: " + path);
}

}  // namespace coa
