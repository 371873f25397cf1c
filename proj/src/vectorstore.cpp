#include "coa/vectorstore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <unordered_set>

#include <json.hpp>

#include "coa/errors.hpp"

namespace coa {

namespace {

using nlohmann::json;

bool hit_before(const StoreQueryHit& a, const StoreQueryHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.chunk.doc_id != b.chunk.doc_id) return a.chunk.doc_id < b.chunk.doc_id;
    return a.chunk.chunk_index < b.chunk.chunk_index;
}

KnowledgeChunk chunk_from_line(const std::string& line, std::size_t line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw CorruptStoreError(e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("doc_id") || !j.contains("chunk_index") ||
        !j.contains("text") || !j.contains("vector"))
        throw CorruptStoreError("chunk object is missing a field", line_no);

    KnowledgeChunk chunk;
    try {
        chunk.doc_id = j["doc_id"].get<std::string>();
        chunk.chunk_index = j["chunk_index"].get<std::size_t>();
        chunk.text = j["text"].get<std::string>();
        chunk.vector = j["vector"].get<EmbeddingVector>();
    } catch (const json::exception& e) {
        throw CorruptStoreError(e.what(), line_no);
    }
    if (chunk.vector.empty()) throw CorruptStoreError("chunk vector is empty", line_no);
    return chunk;
}

}  // namespace

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.size() != b.size())
        throw InvalidInputError("cosine requires equal dimensions");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw InvalidInputError("cosine is undefined for a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<std::string> chunk_document(const std::string& text,
                                        std::size_t chunk_chars,
                                        std::size_t overlap_chars) {
    if (chunk_chars < 1) throw InvalidInputError("chunk_chars must be >= 1");
    if (overlap_chars >= chunk_chars)
        throw InvalidInputError("overlap_chars must be smaller than chunk_chars");

    std::vector<std::string> chunks;
    const std::size_t step = chunk_chars - overlap_chars;
    for (std::size_t pos = 0; pos < text.size(); pos += step) {
        const std::size_t end = std::min(pos + chunk_chars, text.size());
        chunks.push_back(text.substr(pos, end - pos));
        if (end == text.size()) break;
    }
    return chunks;
}

std::size_t VectorStore::upsert_chunks(const std::string& doc_id,
                                       const std::vector<std::string>& texts,
                                       EmbeddingBackend& embedder) {
    std::vector<EmbeddingVector> vectors;
    if (!texts.empty()) vectors = embedder.embed_batch(texts);

    std::unique_lock lock(*mutex_);
    if (!chunks_.empty() && !vectors.empty() &&
        vectors.front().size() != chunks_.front().vector.size())
        throw InvalidInputError("embedder dimension does not match the store");

    std::erase_if(chunks_, [&](const KnowledgeChunk& c) { return c.doc_id == doc_id; });
    for (std::size_t i = 0; i < texts.size(); ++i)
        chunks_.push_back({doc_id, i, texts[i], std::move(vectors[i])});
    return texts.size();
}

std::vector<StoreQueryHit> VectorStore::query(const EmbeddingVector& query_vector,
                                              std::size_t k) const {
    if (k < 1) throw InvalidInputError("k must be >= 1");

    std::shared_lock lock(*mutex_);
    if (chunks_.empty()) throw EmptyStoreError("query against an empty store");

    std::vector<StoreQueryHit> hits;
    hits.reserve(chunks_.size());
    for (const auto& chunk : chunks_)
        hits.push_back({chunk, cosine_similarity(query_vector, chunk.vector)});

    std::sort(hits.begin(), hits.end(), hit_before);
    if (hits.size() > k) hits.resize(k);
    return hits;
}

std::size_t VectorStore::size() const {
    std::shared_lock lock(*mutex_);
    return chunks_.size();
}

std::vector<KnowledgeChunk> VectorStore::chunks() const {
    std::shared_lock lock(*mutex_);
    return chunks_;
}

void save_store(const VectorStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open store file for writing: " + path);
    for (const auto& chunk : store.chunks()) {
        const json j = {{"doc_id", chunk.doc_id},
                        {"chunk_index", chunk.chunk_index},
                        {"text", chunk.text},
                        {"vector", chunk.vector}};
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing store file: " + path);
}

VectorStore load_store(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open store file: " + path);

    VectorStore store;
    std::unordered_set<std::string> seen_keys;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto chunk = chunk_from_line(line, line_no);

        if (!store.chunks_.empty() &&
            chunk.vector.size() != store.chunks_.front().vector.size())
            throw CorruptStoreError("chunk dimension differs from the store", line_no);
        if (!seen_keys.insert(chunk.doc_id + '\x1f' + std::to_string(chunk.chunk_index))
                 .second)
            throw CorruptStoreError("duplicate chunk key " + chunk.doc_id + "/" +
                                        std::to_string(chunk.chunk_index),
                                    line_no);
        store.chunks_.push_back(std::move(chunk));
    }
    return store;
}

}  // namespace coa
