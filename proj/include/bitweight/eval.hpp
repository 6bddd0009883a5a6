#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitweight/core.hpp"
#include "bitweight/ranking.hpp"

namespace bitweight {

struct PRPoint {
    double recall = 0.0;
    double precision = 0.0;

    friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

/// One point per rank position, in rank order.
struct PRCurve {
    std::vector<PRPoint> points;

    friend bool operator==(const PRCurve&, const PRCurve&) = default;
};

enum class ApMode {
    AllPoint,     // interpolated precision averaged over every recall step
    ElevenPoint,  // interpolated precision at recall 0, 0.1, ..., 1
};

/// 1 where the retrieved item carries `query_label`.
inline std::vector<std::uint8_t> relevance(const RankedList& ranked, const CodeDatabase& db, ClassId query_label) {
    std::vector<std::uint8_t> rel;
    rel.reserve(ranked.size());
    for (const auto& e : ranked.entries) {
        if (e.index >= db.size()) throw std::invalid_argument("ranked index " + std::to_string(e.index) + " out of range");
        rel.push_back(db.label(e.index) == query_label ? 1 : 0);
    }
    return rel;
}

namespace detail {

inline void require_relevant(std::span<const std::uint8_t> rel, std::size_t total_relevant) {
    if (total_relevant == 0) throw std::invalid_argument("total_relevant must be >= 1");
    const auto hits = static_cast<std::size_t>(std::count_if(rel.begin(), rel.end(), [](auto r) { return r != 0; }));
    if (hits > total_relevant) throw std::invalid_argument("more relevant items retrieved than total_relevant");
}

}  // namespace detail

/// P@i = hits in the first i / i, R@i = hits in the first i / total_relevant.
inline PRCurve pr_curve(std::span<const std::uint8_t> rel, std::size_t total_relevant) {
    detail::require_relevant(rel, total_relevant);
    PRCurve curve;
    curve.points.reserve(rel.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
        if (rel[i] != 0) ++hits;
        curve.points.push_back({static_cast<double>(hits) / static_cast<double>(total_relevant),
                                static_cast<double>(hits) / static_cast<double>(i + 1)});
    }
    return curve;
}

/// Interpolated average precision: at each recall level, the best precision
/// achieved at that recall or beyond; unreached levels count as zero.
inline double average_precision(std::span<const std::uint8_t> rel, std::size_t total_relevant,
                                 ApMode mode = ApMode::AllPoint) {
    detail::require_relevant(rel, total_relevant);

    // Precision at each hit; the best precision at recall >= h/R is attained
    // at one of the hits h..end, so a suffix maximum over hits suffices.
    std::vector<double> hit_precision;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rel.size(); ++i) {
        if (rel[i] == 0) continue;
        ++hits;
        hit_precision.push_back(static_cast<double>(hits) / static_cast<double>(i + 1));
    }
    for (std::size_t h = hit_precision.size(); h-- > 1;) {
        hit_precision[h - 1] = std::max(hit_precision[h - 1], hit_precision[h]);
    }

    if (mode == ApMode::AllPoint) {
        double sum = 0.0;
        for (double p : hit_precision) sum += p;
        return sum / static_cast<double>(total_relevant);
    }

    double sum = 0.0;
    for (std::size_t t = 0; t <= 10; ++t) {
        // First hit count h with h / R >= t / 10.
        const std::size_t need = (t * total_relevant + 9) / 10;
        const std::size_t h = std::max<std::size_t>(need, 1);
        if (h <= hit_precision.size()) sum += hit_precision[h - 1];
    }
    return sum / 11.0;
}

struct Query {
    BinaryCode code;
    ClassId label = 0;
    /// Position of the query inside the database, if it is a member.
    std::optional<std::size_t> db_index;
};

struct EvalOptions {
    ApMode ap_mode = ApMode::AllPoint;
    /// Drop a query's own database entry from its ranking.
    bool exclude_self = true;
};

struct EvalReport {
    std::vector<double> ap;             // per evaluated query
    std::vector<std::size_t> evaluated;  // positions in the query list
    double map = 0.0;
    PRCurve mean_curve;
    std::size_t skipped = 0;  // queries with no relevant database item

    std::string code_type;
    std::size_t bits = 0;
    std::string mode;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Ranks the whole database for each query (weighted when `w` is given),
/// then aggregates AP, MAP and the position-wise mean PR curve. Queries whose
/// class has no other database member are skipped and counted.
inline EvalReport evaluate(const std::vector<Query>& queries, const CodeDatabase& db,
                           const std::optional<BitWeights>& w = std::nullopt, const EvalOptions& options = {}) {
    if (queries.empty()) throw std::invalid_argument("evaluate needs at least one query");
    if (w) detail::require_same_length(w->size(), db.bits(), "evaluate");

    std::vector<std::size_t> class_size;
    for (ClassId c : db.labels()) {
        if (c >= class_size.size()) class_size.resize(static_cast<std::size_t>(c) + 1, 0);
        ++class_size[c];
    }

    EvalReport report;
    report.bits = db.bits();
    report.mode = w ? "weighted" : "hamming";

    std::vector<double> recall_sum;
    std::vector<double> precision_sum;
    std::size_t shortest = static_cast<std::size_t>(-1);

    for (std::size_t q = 0; q < queries.size(); ++q) {
        const Query& query = queries[q];
        detail::require_same_length(query.code.size(), db.bits(), "evaluate");
        std::size_t total = query.label < class_size.size() ? class_size[query.label] : 0;

        RankedList ranked = w ? scan_weighted(query.code, db, *w) : scan_hamming(query.code, db);
        ranked.query = query.db_index;
        if (options.exclude_self && query.db_index) {
            const std::size_t self = *query.db_index;
            if (self >= db.size()) throw std::invalid_argument("query db_index out of range");
            std::erase_if(ranked.entries, [self](const RankedEntry& e) { return e.index == self; });
            if (db.label(self) == query.label && total > 0) --total;
        }
        if (total == 0) {
            ++report.skipped;
            continue;
        }

        const auto rel = relevance(ranked, db, query.label);
        const PRCurve curve = pr_curve(rel, total);
        report.ap.push_back(average_precision(rel, total, options.ap_mode));
        report.evaluated.push_back(q);

        shortest = std::min(shortest, curve.points.size());
        if (recall_sum.size() < curve.points.size()) {
            recall_sum.resize(curve.points.size(), 0.0);
            precision_sum.resize(curve.points.size(), 0.0);
        }
        for (std::size_t i = 0; i < curve.points.size(); ++i) {
            recall_sum[i] += curve.points[i].recall;
            precision_sum[i] += curve.points[i].precision;
        }
    }

    if (!report.ap.empty()) {
        double sum = 0.0;
        for (double a : report.ap) sum += a;
        const auto n = static_cast<double>(report.ap.size());
        report.map = sum / n;
        for (std::size_t i = 0; i < shortest; ++i) {
            report.mean_curve.points.push_back({recall_sum[i] / n, precision_sum[i] / n});
        }
    }
    return report;
}

}  // namespace bitweight
