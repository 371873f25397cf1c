#pragma once

#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "coa/backends.hpp"
#include "coa/embedding.hpp"

namespace coa {

/// One embedded chunk of a document. (doc_id, chunk_index) is unique within
/// a store and all vectors in a store share one dimension.
struct KnowledgeChunk {
    std::string doc_id;
    std::size_t chunk_index = 0;
    std::string text;
    EmbeddingVector vector;

    bool operator==(const KnowledgeChunk&) const = default;
};

/// A query match: the chunk and its cosine similarity to the query vector.
struct StoreQueryHit {
    KnowledgeChunk chunk;
    double similarity = 0.0;

    bool operator==(const StoreQueryHit&) const = default;
};

/// dot(a,b) / (|a||b|), clamped to [-1, 1] against rounding. Throws
/// InvalidInputError on mismatched dimensions or a zero vector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Splits text into chunks of at most chunk_chars characters where
/// consecutive chunks share exactly overlap_chars characters (the last chunk
/// may be shorter). Empty text gives an empty list. Throws InvalidInputError
/// unless chunk_chars >= 1 and 0 <= overlap_chars < chunk_chars.
std::vector<std::string> chunk_document(const std::string& text,
                                        std::size_t chunk_chars,
                                        std::size_t overlap_chars);

/// Exact brute-force cosine store over embedded chunks. Reads may run
/// concurrently; upserts are exclusive.
class VectorStore {
public:
    VectorStore() : mutex_(std::make_unique<std::shared_mutex>()) {}

    VectorStore(VectorStore&&) = default;
    VectorStore& operator=(VectorStore&&) = default;

    /// Embeds `texts` through the backend and stores them as chunks
    /// (doc_id, 0..n-1), atomically replacing any prior chunks of doc_id.
    /// Returns the number of chunks added. Throws InvalidInputError when the
    /// embedder dimension does not match a nonempty store.
    std::size_t upsert_chunks(const std::string& doc_id,
                              const std::vector<std::string>& texts,
                              EmbeddingBackend& embedder);

    /// Returns the k highest-similarity chunks (fewer if the store is
    /// smaller), similarity descending with ties broken by (doc_id,
    /// chunk_index) ascending. Throws EmptyStoreError on an empty store and
    /// InvalidInputError when k < 1.
    std::vector<StoreQueryHit> query(const EmbeddingVector& query_vector,
                                     std::size_t k) const;

    std::size_t size() const;
    bool empty() const { return size() == 0; }

    /// Snapshot of all chunks in stored order.
    std::vector<KnowledgeChunk> chunks() const;

private:
    friend VectorStore load_store(const std::string& path);

    std::vector<KnowledgeChunk> chunks_;
    std::unique_ptr<std::shared_mutex> mutex_;
};

/// Writes the store as UTF-8 JSONL, one chunk per line:
/// {"doc_id","chunk_index","text","vector"}. Vector doubles survive a save
/// and load bit-exactly. Throws IoError when the path is not writable.
void save_store(const VectorStore& store, const std::string& path);

/// Reads a store back. An empty file is an empty store. Throws IoError when
/// the file cannot be opened and CorruptStoreError (with the 1-based line
/// number) on malformed lines, duplicate chunk keys, or mixed dimensions.
VectorStore load_store(const std::string& path);

}  // namespace coa
