#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitweight/core.hpp"

namespace bitweight {

struct RankedEntry {
    std::size_t index = 0;
    double score = 0.0;

    friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// Database entries in ascending score order; equal scores are ordered by
/// ascending database index.
struct RankedList {
    std::optional<std::size_t> query;
    std::vector<RankedEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
    bool empty() const noexcept { return entries.empty(); }

    friend bool operator==(const RankedList&, const RankedList&) = default;
};

namespace detail {

inline bool ranks_before(const RankedEntry& a, const RankedEntry& b) noexcept {
    return a.score < b.score || (a.score == b.score && a.index < b.index);
}

inline void sort_and_truncate(std::vector<RankedEntry>& entries, std::optional<std::size_t> limit) {
    if (limit && *limit < entries.size()) {
        std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(*limit), entries.end(),
                          ranks_before);
        entries.resize(*limit);
    } else {
        std::sort(entries.begin(), entries.end(), ranks_before);
    }
}

}  // namespace detail

/// Linear XOR/popcount scan. Keeps codes within `radius` (all when absent),
/// sorted by distance then index, truncated to `limit`.
inline RankedList scan_hamming(BitsView query, const CodeDatabase& db, std::optional<std::size_t> limit = std::nullopt,
                               std::optional<std::size_t> radius = std::nullopt) {
    detail::require_same_length(query.size(), db.bits(), "scan_hamming");
    RankedList out;
    out.entries.reserve(db.size());
    for (std::size_t i = 0; i < db.size(); ++i) {
        const std::size_t d = hamming(query, db.code(i));
        if (radius && d > *radius) continue;
        out.entries.push_back({i, static_cast<double>(d)});
    }
    detail::sort_and_truncate(out.entries, limit);
    return out;
}

/// Weighted distance to every database code.
inline RankedList scan_weighted(BitsView query, const CodeDatabase& db, const BitWeights& w,
                                std::optional<std::size_t> limit = std::nullopt) {
    detail::require_same_length(query.size(), db.bits(), "scan_weighted");
    detail::require_same_length(w.size(), db.bits(), "scan_weighted");
    RankedList out;
    out.entries.reserve(db.size());
    const auto stride = db.words_per_code();
    const auto words = db.words();
    for (std::size_t i = 0; i < db.size(); ++i) {
        out.entries.push_back({i, detail::masked_xor_sum(w.values(), query.words(), words.subspan(i * stride, stride))});
    }
    detail::sort_and_truncate(out.entries, limit);
    return out;
}

/// Re-scores the candidate set with the weighted distance and reorders it.
inline RankedList rerank_weighted(BitsView query, const RankedList& candidates, const CodeDatabase& db,
                                  const BitWeights& w) {
    detail::require_same_length(query.size(), db.bits(), "rerank_weighted");
    detail::require_same_length(w.size(), db.bits(), "rerank_weighted");
    RankedList out;
    out.query = candidates.query;
    out.entries.reserve(candidates.size());
    for (const auto& c : candidates.entries) {
        if (c.index >= db.size()) {
            throw std::invalid_argument("candidate index " + std::to_string(c.index) + " out of range");
        }
        out.entries.push_back({c.index, weighted_hamming(w, query, db.code(c.index))});
    }
    detail::sort_and_truncate(out.entries, std::nullopt);
    return out;
}

/// Two-stage search: Hamming-radius filter, weighted re-rank, truncate.
inline RankedList search(BitsView query, const CodeDatabase& db, const BitWeights& w, std::size_t radius,
                         std::size_t limit) {
    RankedList candidates = scan_hamming(query, db, std::nullopt, radius);
    RankedList out = rerank_weighted(query, candidates, db, w);
    if (out.entries.size() > limit) out.entries.resize(limit);
    return out;
}

}  // namespace bitweight
