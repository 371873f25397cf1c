#pragma once

#include <optional>
#include <string>

namespace coa {

/// Where a piece of evidence came from.
enum class SourceKind { Web, Knowledge, Data };

std::string to_string(SourceKind kind);

/// One piece of retrieved evidence for a node's query section. Items
/// returned by an action are sorted by similarity descending with rank
/// contiguous from 0.
struct RetrievedItem {
    SourceKind source = SourceKind::Web;
    std::optional<std::string> title;
    std::optional<std::string> snippet;
    std::string content;
    double similarity = 0.0;
    std::size_t rank = 0;

    bool operator==(const RetrievedItem&) const = default;
};

}  // namespace coa
