#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "bitweight/pipeline.hpp"
#include "support/synthetic.hpp"

using namespace bitweight;
namespace fs = std::filesystem;

TEST(SplitEven, HalvesAreDisjointAndDeterministic) {
    FeatureMatrix fm = oracle::gaussian_classes(3, 2, 11, 1.0, 1);
    for (Eigen::Index r = 0; r < fm.values.rows(); ++r) fm.values(r, 0) = static_cast<double>(r);
    const auto [train, test] = split_even(fm, 9);
    EXPECT_EQ(train.rows(), 5u);
    EXPECT_EQ(test.rows(), 6u);
    std::set<double> seen;
    for (const auto* part : {&train, &test}) {
        for (Eigen::Index r = 0; r < part->values.rows(); ++r) {
            EXPECT_TRUE(seen.insert(part->values(r, 0)).second);
            EXPECT_EQ(part->labels[static_cast<std::size_t>(r)], static_cast<ClassId>(static_cast<int>(part->values(r, 0)) % 3));
            if (r > 0) {
                EXPECT_LT(part->values(r - 1, 0), part->values(r, 0));
            }
        }
    }
    EXPECT_EQ(seen.size(), 11u);
    EXPECT_EQ(split_even(fm, 9).first.values, train.values);
    EXPECT_THROW(split_even(select_rows(fm, {0}), 1), std::invalid_argument);
}

TEST(SelectQueries, PerClassFractionWithFloorOfOne) {
    CodeDatabase db(4);
    for (int i = 0; i < 40; ++i) db.push_back(BinaryCode(4), static_cast<ClassId>(i < 30 ? 0 : (i < 38 ? 1 : 2)));
    const auto q = select_queries(db, 0.1, 5);
    std::map<ClassId, int> per;
    for (std::size_t i : q) ++per[db.label(i)];
    EXPECT_EQ(per[0], 3);
    EXPECT_EQ(per[1], 1);
    EXPECT_EQ(per[2], 1);
    EXPECT_TRUE(std::is_sorted(q.begin(), q.end()));
    EXPECT_EQ(select_queries(db, 0.1, 5), q);
    EXPECT_EQ(select_queries(db, 1.0, 5).size(), 40u);
    EXPECT_THROW(select_queries(db, 0.0, 5), std::invalid_argument);
}

namespace {

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.hash = HashKind::Lsh;
    cfg.bits = 16;
    cfg.triplets = 300;
    cfg.learner.max_iters = 100;
    cfg.seed = 4;
    return cfg;
}

}  // namespace

TEST(RunPipeline, ProducesConsistentArtefacts) {
    const FeatureMatrix fm = oracle::gaussian_classes(4, 10, 400, 2.0, 2);
    const PipelineConfig cfg = small_config();
    const PipelineResult r = run_pipeline(fm, cfg);
    EXPECT_EQ(r.train_codes.size(), 200u);
    EXPECT_EQ(r.test_codes.size(), 200u);
    EXPECT_EQ(r.triplets.size(), 300u);
    EXPECT_EQ(r.weights.size(), 16u);
    EXPECT_EQ(r.hamming.mode, "hamming");
    EXPECT_EQ(r.weighted.mode, "weighted");
    EXPECT_EQ(r.hamming.code_type, "lsh");
    EXPECT_EQ(r.weighted.ap.size() + r.weighted.skipped, r.query_indices.size());
    EXPECT_GT(r.hamming.map, 0.0);
    EXPECT_GT(r.weighted.map, 0.0);
    EXPECT_LE(r.trace.back(), r.trace.front());
}

TEST(RunPipeline, OnlineMode) {
    const FeatureMatrix fm = oracle::gaussian_classes(4, 10, 400, 2.0, 2);
    PipelineConfig cfg = small_config();
    cfg.mode = TrainingMode::Online;
    const PipelineResult r = run_pipeline(fm, cfg);
    EXPECT_EQ(r.trace.size(), 30u);
    for (double v : r.weights.values()) EXPECT_GT(v, 0.0);
}

TEST(RunPipeline, RequiresLabels) {
    FeatureMatrix fm = oracle::gaussian_classes(2, 4, 40, 1.0, 1);
    fm.labels.clear();
    EXPECT_THROW(run_pipeline(fm, small_config()), std::invalid_argument);
}

TEST(RunPipeline, OutputsAreByteIdenticalAcrossRuns) {
    const FeatureMatrix fm = oracle::gaussian_classes(3, 8, 300, 2.0, 3);
    PipelineConfig cfg = small_config();
    cfg.hash = HashKind::Itq;
    cfg.bits = 6;
    const fs::path base = fs::temp_directory_path() / ("bitweight_pipe_" + std::to_string(::getpid()));
    save_pipeline_outputs(base / "a", run_pipeline(fm, cfg));
    save_pipeline_outputs(base / "b", run_pipeline(fm, cfg));
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(base / "a")) {
        const auto name = entry.path().filename();
        EXPECT_EQ(io::detail::read_file(entry.path()), io::detail::read_file(base / "b" / name)) << name;
        ++files;
    }
    EXPECT_EQ(files, 11u);
    const std::string summary = io::detail::read_file(base / "a" / "summary.csv");
    EXPECT_NE(summary.find("itq,6,hamming,"), std::string::npos);
    EXPECT_NE(summary.find("itq,6,weighted,"), std::string::npos);
    fs::remove_all(base);
}
