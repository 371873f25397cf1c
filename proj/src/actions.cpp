#include "coa/actions.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "coa/errors.hpp"
#include "coa/scoring.hpp"
#include "coa/util.hpp"

namespace coa {

namespace {

using nlohmann::json;

/// Splits "scheme://host[:port]/path?query" into the client origin and the
/// request target.
struct UrlParts {
    std::string origin;
    std::string target;
    std::string host;
};

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw InvalidInputError("not a URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    UrlParts parts;
    parts.origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    parts.target = path_start == std::string::npos ? "/" : url.substr(path_start);
    parts.host = parts.origin.substr(scheme_end + 3);
    const auto colon = parts.host.find(':');
    if (colon != std::string::npos) parts.host.resize(colon);
    return parts;
}

std::set<std::string> distinct_tokens(const std::string& text) {
    const auto list = tokenize(text);
    return {list.tokens.begin(), list.tokens.end()};
}

void validate_action_config(const ActionConfig& cfg) {
    if (cfg.top_k < 1) throw InvalidInputError("top_k must be >= 1");
    if (cfg.top_m < cfg.top_k) throw InvalidInputError("top_m must be >= top_k");
    if (cfg.sim_threshold < 0.0 || cfg.sim_threshold > 1.0)
        throw InvalidInputError("sim_threshold must be in [0, 1]");
}

/// Guarantees qs.vector is present, optionally embedding extra texts in the
/// same batch. Returns the vectors of the extra texts.
std::vector<EmbeddingVector> embed_with_query(QuerySection& qs,
                                              std::vector<std::string> extra,
                                              EmbeddingBackend& embedder) {
    const bool need_qs = !qs.vector.has_value();
    if (need_qs) extra.push_back(qs.text);
    if (extra.empty()) return {};
    auto vectors = embedder.embed_batch(extra);
    if (need_qs) {
        qs.vector = std::move(vectors.back());
        vectors.pop_back();
    }
    return vectors;
}

std::string render_record(const DataRecord& record) {
    std::string out = record.key + " = " + record.value;
    if (record.as_of) out += " (as of " + *record.as_of + ")";
    return out;
}

/// RFC-style CSV row: comma-separated, double quotes for fields containing
/// commas or quotes, "" escaping a quote.
std::vector<std::string> parse_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

SearchResult result_from_json(const json& j, const std::string& context) {
    SearchResult r;
    r.title = j.value("title", std::string{});
    r.snippet = j.value("snippet", std::string{});
    r.url = j.value("url", std::string{});
    if (r.url.empty()) throw IoError(context + ": search result without a url");
    if (j.contains("page_content"))
        r.page_content = j["page_content"].get<std::string>();
    return r;
}

}  // namespace

QuerySection build_query_section(const std::string& sub_question,
                                 const std::optional<std::string>& guess_answer) {
    if (sub_question.empty()) throw InvalidInputError("sub-question must be nonempty");
    QuerySection qs;
    qs.sub_question = sub_question;
    qs.text = guess_answer ? sub_question + " | " + *guess_answer : sub_question;
    return qs;
}

FixtureSearchClient FixtureSearchClient::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open search fixture: " + path);

    FixtureSearchClient client;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string context = path + " line " + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError(context + ": " + e.what());
        }
        if (!j.contains("query") || !j.contains("results"))
            throw IoError(context + ": expected {\"query\", \"results\"}");
        std::vector<SearchResult> results;
        for (const auto& item : j["results"])
            results.push_back(result_from_json(item, context));
        client.canned_[j["query"].get<std::string>()] = std::move(results);
    }
    return client;
}

void FixtureSearchClient::add(const std::string& query,
                              std::vector<SearchResult> results) {
    canned_[query] = std::move(results);
}

std::vector<SearchResult> FixtureSearchClient::search(const std::string& query,
                                                      std::size_t limit) {
    const auto it = canned_.find(query);
    if (it == canned_.end()) return {};
    auto results = it->second;
    if (results.size() > limit) results.resize(limit);
    return results;
}

std::string FixtureSearchClient::fetch_content(const SearchResult& result) {
    return result.page_content ? *result.page_content : result.snippet;
}

HttpSearchClient::HttpSearchClient(Config config) : config_(std::move(config)) {}

void HttpSearchClient::rate_limit(const std::string& host) {
    if (config_.requests_per_second <= 0.0) return;
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / config_.requests_per_second));

    std::chrono::steady_clock::time_point wait_until;
    {
        std::lock_guard lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        const auto it = last_request_.find(host);
        wait_until = it == last_request_.end() ? now : it->second + interval;
        if (wait_until < now) wait_until = now;
        last_request_[host] = wait_until;
    }
    std::this_thread::sleep_until(wait_until);
}

std::vector<SearchResult> HttpSearchClient::search(const std::string& query,
                                                   std::size_t limit) {
    const auto parts = split_url(config_.endpoint);
    rate_limit(parts.host);

    httplib::Client client(parts.origin);
    client.set_connection_timeout(config_.timeout_s, 0);
    client.set_read_timeout(config_.timeout_s, 0);

    httplib::Headers headers;
    if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    const httplib::Params params = {{"q", query},
                                    {"count", std::to_string(limit)}};

    auto res = client.Get(parts.target, params, headers);
    if (!res)
        throw RetrievalFailedError("search request failed: " +
                                   httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw RetrievalFailedError("search request returned status " +
                                   std::to_string(res->status));

    json j;
    try {
        j = json::parse(res->body);
    } catch (const json::exception& e) {
        throw RetrievalFailedError(std::string("malformed search response: ") +
                                   e.what());
    }

    std::vector<SearchResult> results;
    for (const auto& item : j.value("results", json::array())) {
        SearchResult r;
        r.title = item.value("title", std::string{});
        r.snippet = item.value("snippet", std::string{});
        r.url = item.value("url", std::string{});
        if (r.url.empty()) continue;
        results.push_back(std::move(r));
        if (results.size() == limit) break;
    }
    return results;
}

std::string HttpSearchClient::fetch_content(const SearchResult& result) {
    if (result.page_content) return *result.page_content;

    const auto parts = split_url(result.url);
    rate_limit(parts.host);

    httplib::Client client(parts.origin);
    client.set_connection_timeout(config_.timeout_s, 0);
    client.set_read_timeout(config_.timeout_s, 0);

    auto res = client.Get(parts.target);
    if (!res)
        throw RetrievalFailedError("page fetch failed: " +
                                   httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw RetrievalFailedError("page fetch returned status " +
                                   std::to_string(res->status));

    auto text = html_to_text(res->body);
    if (text.size() > config_.content_char_cap) text.resize(config_.content_char_cap);
    return text;
}

std::string html_to_text(const std::string& html) {
    const std::string lower = to_lower(html);
    std::string stripped;
    stripped.reserve(html.size());

    std::size_t i = 0;
    while (i < html.size()) {
        if (html[i] != '<') {
            stripped += html[i++];
            continue;
        }
        if (lower.compare(i, 4, "<!--") == 0) {
            const auto end = lower.find("-->", i);
            i = end == std::string::npos ? html.size() : end + 3;
        } else if (lower.compare(i, 7, "<script") == 0) {
            const auto end = lower.find("</script", i);
            const auto close = end == std::string::npos ? std::string::npos
                                                        : lower.find('>', end);
            i = close == std::string::npos ? html.size() : close + 1;
        } else if (lower.compare(i, 6, "<style") == 0) {
            const auto end = lower.find("</style", i);
            const auto close = end == std::string::npos ? std::string::npos
                                                        : lower.find('>', end);
            i = close == std::string::npos ? html.size() : close + 1;
        } else {
            const auto close = html.find('>', i);
            i = close == std::string::npos ? html.size() : close + 1;
        }
        stripped += ' ';
    }

    static const std::vector<std::pair<std::string, std::string>> entities = {
        {"&amp;", "&"}, {"&lt;", "<"},   {"&gt;", ">"},
        {"&quot;", "\""}, {"&#39;", "'"}, {"&apos;", "'"},
        {"&nbsp;", " "},
    };
    for (const auto& [entity, replacement] : entities) {
        std::size_t pos = 0;
        while ((pos = stripped.find(entity, pos)) != std::string::npos) {
            stripped.replace(pos, entity.size(), replacement);
            pos += replacement.size();
        }
    }

    std::string out;
    out.reserve(stripped.size());
    bool in_space = true;
    for (unsigned char c : stripped) {
        if (std::isspace(c)) {
            if (!in_space) out += ' ';
            in_space = true;
        } else {
            out += static_cast<char>(c);
            in_space = false;
        }
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

DataSource::DataSource(std::vector<DataRecord> records)
    : records_(std::move(records)) {
    std::set<std::string> keys;
    for (const auto& r : records_) {
        if (r.key.empty()) throw InvalidInputError("data record with an empty key");
        if (!keys.insert(r.key).second)
            throw InvalidInputError("duplicate data key: " + r.key);
    }
}

DataSource DataSource::from_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open data source: " + path);

    std::string line;
    std::size_t line_no = 0;
    std::size_t columns = 0;
    std::vector<DataRecord> records;
    std::set<std::string> keys;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = parse_csv_row(line);
        const std::string context = path + " line " + std::to_string(line_no);

        if (line_no == 1) {
            if (fields == std::vector<std::string>{"key", "value"})
                columns = 2;
            else if (fields == std::vector<std::string>{"key", "value", "as_of"})
                columns = 3;
            else
                throw IoError(context + ": header must be key,value[,as_of]");
            continue;
        }
        if (fields.size() != columns)
            throw IoError(context + ": expected " + std::to_string(columns) +
                          " fields, got " + std::to_string(fields.size()));
        DataRecord record;
        record.key = fields[0];
        record.value = fields[1];
        if (columns == 3 && !fields[2].empty()) record.as_of = fields[2];
        if (record.key.empty()) throw IoError(context + ": empty key");
        if (!keys.insert(record.key).second)
            throw IoError(context + ": duplicate key " + record.key);
        records.push_back(std::move(record));
    }
    if (columns == 0) throw IoError(path + ": missing header row");

    DataSource source;
    source.records_ = std::move(records);
    return source;
}

DataSource DataSource::from_http(const std::string& url, int timeout_s) {
    const auto parts = split_url(url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);

    auto res = client.Get(parts.target);
    if (!res)
        throw RetrievalFailedError("data endpoint failed: " +
                                   httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw RetrievalFailedError("data endpoint returned status " +
                                   std::to_string(res->status));

    json j;
    try {
        j = json::parse(res->body);
    } catch (const json::exception& e) {
        throw RetrievalFailedError(std::string("malformed data response: ") + e.what());
    }

    auto record_of = [&](const json& item) {
        if (!item.contains("key") || !item.contains("value"))
            throw RetrievalFailedError("data record missing key or value");
        DataRecord r;
        r.key = item["key"].get<std::string>();
        r.value = item["value"].is_string() ? item["value"].get<std::string>()
                                            : item["value"].dump();
        if (item.contains("as_of")) r.as_of = item["as_of"].get<std::string>();
        return r;
    };

    std::vector<DataRecord> records;
    if (j.is_array())
        for (const auto& item : j) records.push_back(record_of(item));
    else
        records.push_back(record_of(j));

    try {
        return DataSource(std::move(records));
    } catch (const InvalidInputError& e) {
        throw RetrievalFailedError(e.what());
    }
}

std::vector<RetrievedItem> web_query_action(QuerySection& qs, bool missing_flag,
                                            SearchClient& search_client,
                                            EmbeddingBackend& embedder,
                                            const ActionConfig& cfg) {
    validate_action_config(cfg);

    std::vector<SearchResult> results;
    try {
        results = search_client.search(qs.sub_question, cfg.top_m);
    } catch (const RetrievalFailedError&) {
        throw;
    } catch (const Error& e) {
        throw RetrievalFailedError(std::string("search failed: ") + e.what());
    }
    if (results.size() > cfg.top_m) results.resize(cfg.top_m);
    if (results.empty()) return {};

    std::vector<RetrievedItem> items;

    if (missing_flag) {
        for (const auto& result : results) {
            if (items.size() == cfg.top_k) break;
            std::string content;
            try {
                content = search_client.fetch_content(result);
            } catch (const Error&) {
                continue;
            }
            if (content.empty()) continue;
            RetrievedItem item;
            item.source = SourceKind::Web;
            item.title = result.title;
            item.snippet = result.snippet;
            item.content = std::move(content);
            item.similarity = 0.0;
            item.rank = items.size();
            items.push_back(std::move(item));
        }
        return items;
    }

    std::vector<std::string> pair_texts;
    pair_texts.reserve(results.size());
    for (const auto& result : results)
        pair_texts.push_back(result.title + " | " + result.snippet);
    const auto pair_vectors = embed_with_query(qs, pair_texts, embedder);

    struct Survivor {
        const SearchResult* result;
        std::string content;
        double similarity = 0.0;
    };
    std::vector<Survivor> survivors;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (cosine_similarity(pair_vectors[i], *qs.vector) < cfg.sim_threshold)
            continue;
        std::string content;
        try {
            content = search_client.fetch_content(results[i]);
        } catch (const Error&) {
            continue;
        }
        if (content.empty()) continue;
        survivors.push_back({&results[i], std::move(content), 0.0});
    }
    if (survivors.empty()) return {};

    std::vector<std::string> contents;
    contents.reserve(survivors.size());
    for (const auto& s : survivors) contents.push_back(s.content);
    const auto content_vectors = embedder.embed_batch(contents);
    for (std::size_t i = 0; i < survivors.size(); ++i)
        survivors[i].similarity = cosine_similarity(content_vectors[i], *qs.vector);

    std::stable_sort(survivors.begin(), survivors.end(),
                     [](const Survivor& a, const Survivor& b) {
                         return a.similarity > b.similarity;
                     });
    if (survivors.size() > cfg.top_k) survivors.resize(cfg.top_k);

    for (auto& survivor : survivors) {
        RetrievedItem item;
        item.source = SourceKind::Web;
        item.title = survivor.result->title;
        item.snippet = survivor.result->snippet;
        item.content = std::move(survivor.content);
        item.similarity = survivor.similarity;
        item.rank = items.size();
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<RetrievedItem> knowledge_action(QuerySection& qs, const VectorStore& store,
                                            EmbeddingBackend& embedder,
                                            std::size_t top_k) {
    if (top_k < 1) throw InvalidInputError("top_k must be >= 1");
    if (store.empty()) throw RetrievalFailedError("knowledge store is empty");

    embed_with_query(qs, {}, embedder);
    const auto hits = store.query(*qs.vector, top_k);

    std::vector<RetrievedItem> items;
    items.reserve(hits.size());
    for (const auto& hit : hits) {
        RetrievedItem item;
        item.source = SourceKind::Knowledge;
        item.title = hit.chunk.doc_id;
        item.content = hit.chunk.text;
        item.similarity = hit.similarity;
        item.rank = items.size();
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<RetrievedItem> data_action(const QuerySection& qs, const DataSource& source,
                                       std::size_t top_k) {
    if (top_k < 1) throw InvalidInputError("top_k must be >= 1");

    const auto query_tokens = distinct_tokens(qs.text);
    if (query_tokens.empty()) return {};

    struct Match {
        const DataRecord* record;
        std::size_t overlap;
    };
    std::vector<Match> matches;
    for (const auto& record : source.records()) {
        const auto key_tokens = distinct_tokens(record.key);
        std::size_t overlap = 0;
        for (const auto& t : key_tokens) overlap += query_tokens.count(t);
        if (overlap > 0) matches.push_back({&record, overlap});
    }

    std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        return a.record->key < b.record->key;
    });
    if (matches.size() > top_k) matches.resize(top_k);

    std::vector<RetrievedItem> items;
    items.reserve(matches.size());
    for (const auto& match : matches) {
        RetrievedItem item;
        item.source = SourceKind::Data;
        item.title = match.record->key;
        item.content = render_record(*match.record);
        item.similarity = static_cast<double>(match.overlap) /
                          static_cast<double>(query_tokens.size());
        item.rank = items.size();
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<RetrievedItem> ActionSet::run(ActionType action, QuerySection& qs,
                                          bool missing_flag) const {
    switch (action) {
        case ActionType::WebQuery:
            if (!search_client_)
                throw RetrievalFailedError("no search client configured");
            return web_query_action(qs, missing_flag, *search_client_, embedder_,
                                    config_);
        case ActionType::KnowledgeEncode:
            if (!store_) throw RetrievalFailedError("no knowledge store configured");
            return knowledge_action(qs, *store_, embedder_, config_.top_k);
        case ActionType::DataAnalyze:
            if (!data_source_)
                throw RetrievalFailedError("no data source configured");
            return data_action(qs, *data_source_, config_.top_k);
    }
    throw InvalidInputError("unknown action type");
}

}  // namespace coa
