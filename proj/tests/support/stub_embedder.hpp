#pragma once

#include <map>
#include <string>
#include <vector>

#include "coa/backends.hpp"
#include "coa/errors.hpp"

namespace coa::testing {

/// Embedding backend with per-text vectors set by hand, so tests control
/// every cosine exactly. Unknown texts fail loudly.
class StubEmbedder : public EmbeddingBackend {
public:
    explicit StubEmbedder(std::size_t dim) : dim_(dim) {}

    void set(const std::string& text, EmbeddingVector v) {
        if (v.size() != dim_)
            throw InvalidInputError("stub vector has the wrong dimension");
        vectors_[text] = std::move(v);
    }

    std::size_t dim() const override { return dim_; }

protected:
    std::vector<EmbeddingVector> embed_impl(
        const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            const auto it = vectors_.find(t);
            if (it == vectors_.end())
                throw InvalidInputError("StubEmbedder has no vector for \"" + t + "\"");
            out.push_back(it->second);
        }
        return out;
    }

private:
    std::map<std::string, EmbeddingVector> vectors_;
    std::size_t dim_;
};

}  // namespace coa::testing
