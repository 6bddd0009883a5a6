#include <gtest/gtest.h>

#include <algorithm>

#include "bitweight/ranking.hpp"
#include "support/oracles.hpp"

using namespace bitweight;

namespace {

CodeDatabase db_of(std::initializer_list<const char*> codes) {
    CodeDatabase db(std::string_view(*codes.begin()).size());
    for (const char* c : codes) db.push_back(BinaryCode::from_string(c), 0);
    return db;
}

std::vector<std::size_t> indices(const RankedList& r) {
    std::vector<std::size_t> out;
    for (const auto& e : r.entries) out.push_back(e.index);
    return out;
}

std::vector<double> scores(const RankedList& r) {
    std::vector<double> out;
    for (const auto& e : r.entries) out.push_back(e.score);
    return out;
}

}  // namespace

TEST(ScanHamming, HandOrder) {
    const CodeDatabase db = db_of({"0000", "0011", "1111"});
    const RankedList r = scan_hamming(BinaryCode::from_string("0000"), db);
    EXPECT_EQ(indices(r), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(scores(r), (std::vector<double>{0, 2, 4}));
}

TEST(ScanHamming, RadiusAndLimit) {
    const CodeDatabase db = db_of({"0110", "0000", "0110", "1111", "0111"});
    const BinaryCode q = BinaryCode::from_string("0110");
    EXPECT_EQ(indices(scan_hamming(q, db, std::nullopt, 0)), (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(indices(scan_hamming(q, db, 1)), (std::vector<std::size_t>{0}));
    EXPECT_EQ(indices(scan_hamming(q, db, 3, 2)), (std::vector<std::size_t>{0, 2, 4}));
    EXPECT_THROW(scan_hamming(BinaryCode::from_string("01"), db), std::invalid_argument);
}

TEST(RerankWeighted, HandWeights) {
    const CodeDatabase db = db_of({"01", "10"});
    const BinaryCode q = BinaryCode::from_string("00");
    const BitWeights w(std::vector<double>{5.0, 1.0});
    const RankedList r = rerank_weighted(q, scan_hamming(q, db), db, w);
    EXPECT_EQ(indices(r), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(scores(r), (std::vector<double>{1.0, 5.0}));
}

TEST(RerankWeighted, InvalidIndex) {
    const CodeDatabase db = db_of({"01", "10"});
    RankedList bogus;
    bogus.entries.push_back({7, 0.0});
    EXPECT_THROW(rerank_weighted(BinaryCode::from_string("00"), bogus, db, BitWeights::ones(2)), std::invalid_argument);
}

TEST(RerankWeighted, PermutationAndUnitWeightReduction) {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const CodeDatabase db = oracle::random_db(rng, 300, 24, 4);
        const BinaryCode q = oracle::random_code(rng, 24);
        const RankedList candidates = scan_hamming(q, db, std::nullopt, 10);
        const RankedList unit = rerank_weighted(q, candidates, db, BitWeights::ones(24));
        EXPECT_EQ(unit.entries, candidates.entries);

        const BitWeights w(oracle::random_positive(rng, 24));
        const RankedList re = rerank_weighted(q, candidates, db, w);
        auto a = indices(re), b = indices(candidates);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b);
        for (std::size_t i = 1; i < re.size(); ++i) {
            EXPECT_TRUE(re.entries[i - 1].score < re.entries[i].score ||
                        (re.entries[i - 1].score == re.entries[i].score && re.entries[i - 1].index < re.entries[i].index));
        }
        for (const auto& e : re.entries) {
            EXPECT_NEAR(e.score, oracle::naive_weighted_hamming({w.values().begin(), w.values().end()}, q, db.code(e.index)), 1e-12);
        }
    }
}

TEST(Search, FullRadiusEqualsExhaustiveWeightedScan) {
    Rng rng(32);
    const CodeDatabase db = oracle::random_db(rng, 500, 40, 3);
    const BinaryCode q = oracle::random_code(rng, 40);
    const BitWeights w(oracle::random_positive(rng, 40));
    EXPECT_EQ(search(q, db, w, 40, db.size()).entries, scan_weighted(q, db, w).entries);
    EXPECT_EQ(search(q, db, w, 40, 7).entries, scan_weighted(q, db, w, 7).entries);
    EXPECT_EQ(search(q, db, BitWeights::ones(40), 40, db.size()).entries, scan_hamming(q, db).entries);
}

TEST(Search, RadiusCanDropWeightedNearest) {
    // Item 1 is two bits away but both bits carry tiny weight.
    const CodeDatabase db = db_of({"1000", "0011"});
    const BinaryCode q = BinaryCode::from_string("0000");
    const BitWeights w(std::vector<double>{10.0, 1.0, 0.1, 0.1});
    EXPECT_EQ(indices(search(q, db, w, 4, 2)), (std::vector<std::size_t>{1, 0}));
    EXPECT_EQ(indices(search(q, db, w, 1, 2)), (std::vector<std::size_t>{0}));
}

TEST(Search, EmptyFilterResult) {
    const CodeDatabase db = db_of({"1111"});
    const RankedList r = search(BinaryCode::from_string("0000"), db, BitWeights::ones(4), 1, 10);
    EXPECT_TRUE(r.empty());
}
