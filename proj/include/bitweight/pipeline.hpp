#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bitweight/eval.hpp"
#include "bitweight/hashing.hpp"
#include "bitweight/io.hpp"
#include "bitweight/learner.hpp"
#include "bitweight/online.hpp"
#include "bitweight/rng.hpp"
#include "bitweight/sampler.hpp"

namespace bitweight {

enum class TrainingMode { Offline, Online };

struct PipelineConfig {
    HashKind hash = HashKind::Itq;
    std::size_t bits = 32;
    int itq_iters = 50;
    bool unit_variance = false;
    std::size_t triplets = 5000;
    double query_fraction = 0.1;  // of each test class
    TrainingMode mode = TrainingMode::Offline;
    LearnerConfig learner;
    EvalOptions eval;
    std::uint64_t seed = 1;
};

/// Stage seeds derived from the run seed.
struct StageSeeds {
    std::uint64_t split, hash, sample, queries;

    static StageSeeds from(std::uint64_t seed) { return {seed, seed + 1, seed + 2, seed + 3}; }
};

inline FeatureMatrix select_rows(const FeatureMatrix& fm, const std::vector<std::size_t>& rows) {
    FeatureMatrix out;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), fm.values.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.values.row(static_cast<Eigen::Index>(r)) = fm.values.row(static_cast<Eigen::Index>(rows[r]));
    if (fm.has_labels()) {
        for (std::size_t r : rows) out.labels.push_back(fm.labels[r]);
    }
    return out;
}

/// Seeded shuffle, first half for training and the rest for testing. Both
/// halves keep the original row order.
inline std::pair<FeatureMatrix, FeatureMatrix> split_even(const FeatureMatrix& fm, std::uint64_t seed) {
    if (fm.rows() < 2) throw std::invalid_argument("need at least two rows to split");
    std::vector<std::size_t> order(fm.rows());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    const std::size_t half = order.size() / 2;
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {select_rows(fm, train), select_rows(fm, test)};
}

/// Picks round(fraction * n) (at least one) random members of every class.
/// Returned indices are sorted.
inline std::vector<std::size_t> select_queries(const CodeDatabase& db, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("query fraction must be in (0, 1]");
    std::map<ClassId, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < db.size(); ++i) members[db.label(i)].push_back(i);
    Rng rng(seed);
    std::vector<std::size_t> out;
    for (auto& [label, idx] : members) {
        const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size()))));
        for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
        out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<Query> queries_from_db(const CodeDatabase& db, const std::vector<std::size_t>& indices) {
    std::vector<Query> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back({BinaryCode(db.code(i)), db.label(i), i});
    return out;
}

struct PipelineResult {
    HashModel model;
    CodeDatabase train_codes;
    CodeDatabase test_codes;
    TripletBatch triplets;
    BitWeights weights;
    std::vector<double> trace;
    std::vector<std::size_t> query_indices;
    EvalReport hamming;
    EvalReport weighted;
};

/// Hash, sample, learn and evaluate: hash functions and triplets come from
/// the training set, queries and the ranked database from the test set.
inline PipelineResult run_pipeline(const FeatureMatrix& train, const FeatureMatrix& test, const PipelineConfig& cfg) {
    if (!train.has_labels() || !test.has_labels()) throw std::invalid_argument("pipeline needs labelled features");
    const StageSeeds seeds = StageSeeds::from(cfg.seed);
    const HashOptions hopts{cfg.unit_variance};

    PipelineResult out;
    out.model = cfg.hash == HashKind::Lsh ? train_lsh(train, cfg.bits, seeds.hash, hopts)
                                          : train_itq(train, cfg.bits, cfg.itq_iters, seeds.hash, hopts);
    out.train_codes = encode(out.model, train);
    out.test_codes = encode(out.model, test);
    out.triplets = sample_triplets(out.train_codes, cfg.triplets, seeds.sample);

    if (cfg.mode == TrainingMode::Offline) {
        TrainResult trained = train_offline(out.triplets, cfg.learner);
        out.weights = std::move(trained.weights);
        out.trace = std::move(trained.trace);
    } else {
        OnlineResult trained = train_online(Minibatches(out.triplets, cfg.learner.minibatch_size), cfg.learner);
        out.weights = std::move(trained.weights);
        out.trace = std::move(trained.trace);
    }

    out.query_indices = select_queries(out.test_codes, cfg.query_fraction, seeds.queries);
    const auto queries = queries_from_db(out.test_codes, out.query_indices);
    out.hamming = evaluate(queries, out.test_codes, std::nullopt, cfg.eval);
    out.weighted = evaluate(queries, out.test_codes, out.weights, cfg.eval);
    for (EvalReport* r : {&out.hamming, &out.weighted}) r->code_type = to_string(cfg.hash);
    return out;
}

inline PipelineResult run_pipeline(const FeatureMatrix& all, const PipelineConfig& cfg) {
    auto [train, test] = split_even(all, StageSeeds::from(cfg.seed).split);
    return run_pipeline(train, test, cfg);
}

/// Writes every stage artefact of a pipeline run into `dir`.
inline void save_pipeline_outputs(const std::filesystem::path& dir, const PipelineResult& r) {
    std::filesystem::create_directories(dir);
    io::save_model(dir / "model.bin", r.model);
    io::save_codes(dir / "train_codes.bin", r.train_codes);
    io::save_codes(dir / "test_codes.bin", r.test_codes);
    io::save_triplets(dir / "triplets.bin", r.triplets);
    io::save_weights(dir / "weights.bin", r.weights);
    io::save_weights_text(dir / "weights.txt", r.weights);
    std::string q;
    for (std::size_t i : r.query_indices) q += std::to_string(i) + "\n";
    io::detail::write_file(dir / "queries.txt", q);
    std::string trace = "step,objective\n";
    for (std::size_t i = 0; i < r.trace.size(); ++i) trace += std::to_string(i) + "," + io::detail::format_double(r.trace[i]) + "\n";
    io::detail::write_file(dir / "trace.csv", trace);
    io::save_pr_csv(dir / "pr_hamming.csv", r.hamming.mean_curve);
    io::save_pr_csv(dir / "pr_weighted.csv", r.weighted.mean_curve);
    io::save_summary_csv(dir / "summary.csv", {r.hamming, r.weighted});
}

}  // namespace bitweight
