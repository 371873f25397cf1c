#pragma once

#include <cstddef>
#include <vector>

namespace coa {

/// Fixed-length list of finite reals; the length is the embedding dimension.
using EmbeddingVector = std::vector<double>;

/// Dimension of the production embedding model.
inline constexpr std::size_t kDefaultEmbeddingDim = 1536;

}  // namespace coa
