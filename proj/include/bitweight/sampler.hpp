#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "bitweight/core.hpp"
#include "bitweight/error.hpp"
#include "bitweight/rng.hpp"

namespace bitweight {

/// Database indices (i, j, k, s): query, dissimilar sample and two similar
/// samples. c_i != c_j, c_i == c_k == c_s, and i, k, s are pairwise distinct.
struct Quadruplet {
    std::size_t query = 0;
    std::size_t dissimilar = 0;
    std::size_t similar_a = 0;
    std::size_t similar_b = 0;

    std::array<std::size_t, 4> indices() const { return {query, dissimilar, similar_a, similar_b}; }
    friend auto operator<=>(const Quadruplet&, const Quadruplet&) = default;
};

/// Training unit: a = Acdv(q_i, q_j), b = Acdv(q_i, q_k), c = Acdv(q_i, q_s).
struct AcdvTriplet {
    Acdv dissimilar;
    Acdv similar_a;
    Acdv similar_b;

    std::size_t bits() const noexcept { return dissimilar.size(); }
    friend bool operator==(const AcdvTriplet&, const AcdvTriplet&) = default;
};

struct TripletBatch {
    std::vector<AcdvTriplet> triplets;
    std::uint64_t seed = 0;
    std::vector<Quadruplet> sources;  // parallel to triplets

    std::size_t size() const noexcept { return triplets.size(); }
    bool empty() const noexcept { return triplets.empty(); }
    /// Bit length of the triplets, 0 for an empty batch.
    std::size_t bits() const noexcept { return triplets.empty() ? 0 : triplets.front().bits(); }

    friend bool operator==(const TripletBatch&, const TripletBatch&) = default;
};

/// Multiplier on the requested count bounding the total number of draws.
inline constexpr std::size_t kRejectionBudgetFactor = 100;

/// Draws `count` distinct quadruplets. The query class follows a multinomial
/// law with probabilities proportional to class sizes, restricted to classes
/// holding at least three samples; the three same-class members are drawn
/// without replacement; the dissimilar sample comes from a uniformly chosen
/// other class.
inline std::vector<Quadruplet> sample_quadruplets(const CodeDatabase& db, std::size_t count, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("quadruplet count must be at least 1");

    std::map<ClassId, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < db.size(); ++i) members[db.label(i)].push_back(i);
    if (members.size() < 2) throw std::invalid_argument("sampling needs at least two classes");

    std::vector<ClassId> classes;
    std::vector<ClassId> eligible;
    std::vector<std::size_t> cumulative;  // over eligible class sizes
    std::size_t eligible_total = 0;
    for (const auto& [label, idx] : members) {
        classes.push_back(label);
        if (idx.size() >= 3) {
            eligible.push_back(label);
            eligible_total += idx.size();
            cumulative.push_back(eligible_total);
        }
    }
    if (eligible.empty()) throw std::invalid_argument("sampling needs a class with at least three samples");

    Rng rng(seed);
    std::set<Quadruplet> seen;
    std::vector<Quadruplet> out;
    out.reserve(count);
    const std::size_t budget = kRejectionBudgetFactor * count;

    for (std::size_t attempt = 0; out.size() < count; ++attempt) {
        if (attempt >= budget) {
            throw ExhaustionError("could not draw " + std::to_string(count) + " distinct quadruplets within " +
                                  std::to_string(budget) + " attempts (got " + std::to_string(out.size()) + ")");
        }
        const std::uint64_t u = rng.uniform_index(eligible_total);
        const auto pos = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        const ClassId query_class = eligible[pos];
        const auto& same = members.at(query_class);

        // Three distinct positions within the class, in draw order.
        const std::size_t n = same.size();
        const std::size_t p0 = rng.uniform_index(n);
        std::size_t p1 = rng.uniform_index(n - 1);
        if (p1 >= p0) ++p1;
        std::size_t p2 = rng.uniform_index(n - 2);
        for (std::size_t taken : {std::min(p0, p1), std::max(p0, p1)}) {
            if (p2 >= taken) ++p2;
        }

        std::size_t other = rng.uniform_index(classes.size() - 1);
        const auto self = static_cast<std::size_t>(
            std::find(classes.begin(), classes.end(), query_class) - classes.begin());
        if (other >= self) ++other;
        const auto& diff = members.at(classes[other]);
        const std::size_t j = diff[rng.uniform_index(diff.size())];

        const Quadruplet q{same[p0], j, same[p1], same[p2]};
        if (seen.insert(q).second) out.push_back(q);
    }
    return out;
}

inline TripletBatch to_triplets(const CodeDatabase& db, const std::vector<Quadruplet>& quads,
                                std::uint64_t seed = 0) {
    TripletBatch batch;
    batch.seed = seed;
    batch.triplets.reserve(quads.size());
    batch.sources.reserve(quads.size());
    for (const auto& q : quads) {
        for (std::size_t idx : q.indices()) {
            if (idx >= db.size()) {
                throw std::invalid_argument("quadruplet index " + std::to_string(idx) + " out of range");
            }
        }
        const BitsView qi = db.code(q.query);
        batch.triplets.push_back(
            AcdvTriplet{acdv(qi, db.code(q.dissimilar)), acdv(qi, db.code(q.similar_a)), acdv(qi, db.code(q.similar_b))});
        batch.sources.push_back(q);
    }
    return batch;
}

/// sample_quadruplets followed by to_triplets.
inline TripletBatch sample_triplets(const CodeDatabase& db, std::size_t count, std::uint64_t seed) {
    return to_triplets(db, sample_quadruplets(db, count, seed), seed);
}

}  // namespace bitweight
