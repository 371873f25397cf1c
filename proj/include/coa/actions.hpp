#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "coa/backends.hpp"
#include "coa/chain.hpp"
#include "coa/retrieved.hpp"
#include "coa/vectorstore.hpp"

namespace coa {

/// What a node retrieves against: the sub-question, optionally joined with
/// the guess answer, plus a memoized embedding of that text.
struct QuerySection {
    std::string sub_question;
    std::string text;
    std::optional<EmbeddingVector> vector;
};

/// text = "sub | guess" when a guess is present, else the sub-question
/// alone. Throws InvalidInputError on an empty sub-question.
QuerySection build_query_section(const std::string& sub_question,
                                 const std::optional<std::string>& guess_answer);

/// One search engine result. page_content is filled lazily by
/// fetch_content.
struct SearchResult {
    std::string title;
    std::string snippet;
    std::string url;
    std::optional<std::string> page_content;

    bool operator==(const SearchResult&) const = default;
};

/// Pluggable search provider.
class SearchClient {
public:
    virtual ~SearchClient() = default;

    /// Returns up to `limit` results for the query, best first. Throws
    /// RetrievalFailedError when the provider is unreachable.
    virtual std::vector<SearchResult> search(const std::string& query,
                                             std::size_t limit) = 0;

    /// Returns the visible text of the result's page. Throws
    /// RetrievalFailedError when the page cannot be fetched.
    virtual std::string fetch_content(const SearchResult& result) = 0;
};

/// Offline search client backed by a JSONL fixture file. Each line is
/// {"query": text, "results": [{"title","snippet","url","page_content"?}]}.
/// Unknown queries return zero results; fetch_content returns the canned
/// page_content, falling back to the snippet.
class FixtureSearchClient : public SearchClient {
public:
    static FixtureSearchClient from_file(const std::string& path);

    /// Registers canned results for a query, replacing prior ones.
    void add(const std::string& query, std::vector<SearchResult> results);

    std::vector<SearchResult> search(const std::string& query,
                                     std::size_t limit) override;
    std::string fetch_content(const SearchResult& result) override;

private:
    std::map<std::string, std::vector<SearchResult>> canned_;
};

/// SERP-style HTTP search client: GET {endpoint}?q=...&count=... with a
/// bearer key returns {"results": [{"title","snippet","url"}]};
/// fetch_content GETs the result URL and reduces the HTML to visible text
/// capped at content_char_cap. Requests are rate-limited per host.
class HttpSearchClient : public SearchClient {
public:
    struct Config {
        std::string endpoint;
        std::string api_key;
        double requests_per_second = 4.0;
        int timeout_s = 30;
        std::size_t content_char_cap = 4000;
    };

    explicit HttpSearchClient(Config config);

    std::vector<SearchResult> search(const std::string& query,
                                     std::size_t limit) override;
    std::string fetch_content(const SearchResult& result) override;

private:
    void rate_limit(const std::string& host);

    Config config_;
    std::mutex mutex_;
    std::map<std::string, std::chrono::steady_clock::time_point> last_request_;
};

/// Strips tags, drops script/style blocks, decodes the common entities, and
/// collapses whitespace.
std::string html_to_text(const std::string& html);

/// One key-value fact, optionally timestamped.
struct DataRecord {
    std::string key;
    std::string value;
    std::optional<std::string> as_of;

    bool operator==(const DataRecord&) const = default;
};

/// Snapshot of a structured data source with unique keys.
class DataSource {
public:
    DataSource() = default;
    explicit DataSource(std::vector<DataRecord> records);

    /// Loads a CSV file with header "key,value" or "key,value,as_of".
    /// Throws IoError on unreadable files, malformed rows, or duplicate
    /// keys.
    static DataSource from_csv(const std::string& path);

    /// Fetches records from an HTTP endpoint returning one JSON object
    /// {"key","value","as_of"?} or an array of them. Throws
    /// RetrievalFailedError when unreachable or malformed.
    static DataSource from_http(const std::string& url, int timeout_s = 30);

    const std::vector<DataRecord>& records() const { return records_; }

private:
    std::vector<DataRecord> records_;
};

/// Retrieval parameters shared by the actions.
struct ActionConfig {
    std::size_t top_m = 8;
    std::size_t top_k = 3;
    double sim_threshold = 0.8;
};

/// Web retrieval. Searches for the sub-question text and takes top_m
/// results. With missing_flag the contents of the first top_k results are
/// returned directly (similarity 0, search order). Otherwise each
/// "title | snippet" pair is embedded alongside the query section, pairs
/// with cosine below sim_threshold are dropped, survivor pages are fetched,
/// and their contents are embedded and ranked by cosine against the query
/// section; the top_k contents are returned. Throws RetrievalFailedError
/// when the search provider fails; zero results or zero survivors give [].
std::vector<RetrievedItem> web_query_action(QuerySection& qs, bool missing_flag,
                                            SearchClient& search_client,
                                            EmbeddingBackend& embedder,
                                            const ActionConfig& cfg);

/// Embeds the query section and returns the store's top_k chunks as items
/// (title = doc id). Throws RetrievalFailedError on an empty store.
std::vector<RetrievedItem> knowledge_action(QuerySection& qs, const VectorStore& store,
                                            EmbeddingBackend& embedder,
                                            std::size_t top_k);

/// Ranks records by the number of distinct query tokens their keys share
/// (ties by key ascending) and renders the best top_k as
/// "key = value (as of timestamp)" items. similarity = shared tokens /
/// distinct query tokens. Records sharing no token are dropped.
std::vector<RetrievedItem> data_action(const QuerySection& qs, const DataSource& source,
                                       std::size_t top_k);

/// The retrieval resources available to a run, dispatched by action type.
/// Unconfigured resources surface as RetrievalFailedError so the executor
/// can degrade the node.
class ActionSet {
public:
    ActionSet(std::shared_ptr<SearchClient> search_client,
              std::shared_ptr<const VectorStore> store,
              std::shared_ptr<const DataSource> data_source,
              EmbeddingBackend& embedder, ActionConfig config)
        : search_client_(std::move(search_client)),
          store_(std::move(store)),
          data_source_(std::move(data_source)),
          embedder_(embedder),
          config_(config) {}

    std::vector<RetrievedItem> run(ActionType action, QuerySection& qs,
                                   bool missing_flag) const;

    const ActionConfig& config() const { return config_; }

private:
    std::shared_ptr<SearchClient> search_client_;
    std::shared_ptr<const VectorStore> store_;
    std::shared_ptr<const DataSource> data_source_;
    EmbeddingBackend& embedder_;
    ActionConfig config_;
};

}  // namespace coa
