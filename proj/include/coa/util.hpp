#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace coa {

/// FNV-1a over the bytes of `text`. Stable across platforms and processes.
std::uint64_t fnv1a64(std::string_view text);

/// Lowercase hex SHA-256 digest of `text`.
std::string sha256_hex(std::string_view text);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Runs fn(i) for i in [0, n) on up to max_workers threads. Indices are
/// claimed from a shared counter; results must be written to per-index slots
/// by the callable. The first exception thrown by any worker is rethrown on
/// the calling thread after all workers join.
void parallel_for(std::size_t n, std::size_t max_workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace coa
