#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "bitweight/io.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace bitweight;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("bitweight_io_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    void write(const std::string& name, const std::string& content) const {
        std::ofstream(path(name), std::ios::binary) << content;
    }

    std::string read(const std::string& name) const { return io::detail::read_file(path(name)); }

    fs::path dir_;
};

std::string be32(std::uint32_t v) {
    return {char(v >> 24), char((v >> 16) & 0xFF), char((v >> 8) & 0xFF), char(v & 0xFF)};
}

}  // namespace

TEST_F(IoTest, CodesRoundTripAndLayout) {
    CodeDatabase db(4);
    db.push_back(BinaryCode::from_string("1011"), 7);
    db.push_back(BinaryCode::from_string("0001"), 3);
    io::save_codes(path("c.bin"), db);
    EXPECT_EQ(io::load_codes(path("c.bin")), db);

    const std::string raw = read("c.bin");
    ASSERT_EQ(raw.size(), 32u + 2 * 8 + 2 * 4);
    EXPECT_EQ(raw.substr(0, 4), "BCOD");
    EXPECT_EQ(static_cast<unsigned char>(raw[32]), 0b00001101);
    EXPECT_EQ(static_cast<unsigned char>(raw[40]), 0b00001000);
    EXPECT_EQ(static_cast<unsigned char>(raw[48]), 7);
}

TEST_F(IoTest, CodesRoundTripRandom) {
    Rng rng(51);
    for (std::size_t bits : {1u, 64u, 65u, 300u, 1024u}) {
        const CodeDatabase db = oracle::random_db(rng, 37, bits, 9);
        io::save_codes(path("r.bin"), db);
        EXPECT_EQ(io::load_codes(path("r.bin")), db);
    }
}

TEST_F(IoTest, CodesRejectCorruptFiles) {
    CodeDatabase db(8);
    db.push_back(BinaryCode::from_string("10110001"), 1);
    io::save_codes(path("c.bin"), db);
    std::string raw = read("c.bin");

    std::string foreign = raw;
    foreign.replace(0, 4, "XXXX");
    write("foreign.bin", foreign);
    EXPECT_THROW(io::load_codes(path("foreign.bin")), FormatError);

    std::string version = raw;
    version[4] = 2;
    write("version.bin", version);
    EXPECT_THROW(io::load_codes(path("version.bin")), FormatError);

    write("trunc.bin", raw.substr(0, raw.size() - 1));
    EXPECT_THROW(io::load_codes(path("trunc.bin")), FormatError);

    write("short.bin", raw.substr(0, 10));
    EXPECT_THROW(io::load_codes(path("short.bin")), FormatError);

    std::string padding = raw;
    padding[33] = 1;  // bit 8 of an 8-bit code
    write("pad.bin", padding);
    EXPECT_THROW(io::load_codes(path("pad.bin")), FormatError);
}

TEST_F(IoTest, WeightsRoundTripBitExact) {
    const BitWeights w(std::vector<double>{0.1, 1e-12, 3.5, 0.0, 1.0 / 3.0});
    io::save_weights(path("w.bin"), w);
    EXPECT_EQ(io::load_weights(path("w.bin")), w);
    EXPECT_EQ(read("w.bin").size(), 12u + 5 * 8);
}

TEST_F(IoTest, WeightsRejectNegativeAndTruncated) {
    io::save_weights(path("w.bin"), BitWeights::ones(2));
    std::string raw = read("w.bin");
    std::string neg = raw;
    neg[12 + 7] = static_cast<char>(0xBF);  // 1.0 -> -1.0
    write("neg.bin", neg);
    EXPECT_THROW(io::load_weights(path("neg.bin")), FormatError);
    write("trunc.bin", raw.substr(0, raw.size() - 3));
    EXPECT_THROW(io::load_weights(path("trunc.bin")), FormatError);
    write("codes.bin", "BCOD" + raw.substr(4));
    EXPECT_THROW(io::load_weights(path("codes.bin")), FormatError);
}

TEST_F(IoTest, WeightsText) {
    io::save_weights_text(path("w.txt"), BitWeights(std::vector<double>{0.5, 2.0}));
    EXPECT_EQ(read("w.txt"), "0.5\n2\n");
}

TEST_F(IoTest, ModelRoundTripThenEncode) {
    const FeatureMatrix fm = oracle::gaussian_classes(3, 12, 90, 1.5, 3);
    for (const HashModel& m : {train_lsh(fm, 20, 4), train_itq(fm, 10, 30, 4)}) {
        io::save_model(path("m.bin"), m);
        const HashModel back = io::load_model(path("m.bin"));
        EXPECT_EQ(back.kind, m.kind);
        EXPECT_EQ(back.seed, m.seed);
        EXPECT_EQ(back.mean, m.mean);
        EXPECT_EQ(back.projection, m.projection);
        EXPECT_EQ(back.rotation, m.rotation);
        EXPECT_EQ(encode(back, fm), encode(m, fm));
    }
    std::string raw = read("m.bin");
    write("trunc.bin", raw.substr(0, raw.size() - 8));
    EXPECT_THROW(io::load_model(path("trunc.bin")), FormatError);
}

TEST_F(IoTest, TripletsRoundTripAndStreaming) {
    Rng rng(52);
    const CodeDatabase db = oracle::random_db(rng, 100, 70, 4);
    const TripletBatch batch = sample_triplets(db, 55, 12);
    io::save_triplets(path("t.bin"), batch);
    EXPECT_EQ(io::load_triplets(path("t.bin")), batch);

    io::TripletChunks chunks(path("t.bin"), 10);
    std::size_t n = 0, count = 0;
    for (const TripletBatch& mb : chunks) {
        EXPECT_LE(mb.size(), 10u);
        for (std::size_t i = 0; i < mb.size(); ++i) EXPECT_EQ(mb.triplets[i], batch.triplets[n + i]);
        n += mb.size();
        ++count;
    }
    EXPECT_EQ(n, 55u);
    EXPECT_EQ(count, 6u);
}

TEST_F(IoTest, TripletsWithoutSources) {
    Rng rng(53);
    const TripletBatch batch = oracle::random_batch(rng, 4, 9);
    io::save_triplets(path("t.bin"), batch);
    EXPECT_EQ(io::load_triplets(path("t.bin")), batch);
    const std::string raw = read("t.bin");
    write("trunc.bin", raw.substr(0, raw.size() - 1));
    EXPECT_THROW(io::load_triplets(path("trunc.bin")), FormatError);
}

TEST_F(IoTest, FeaturesCsv) {
    write("f.csv", "a,b,label\n1.5,2,0\n-3,4e-1,1\n5,6,1\n");
    const FeatureMatrix fm = io::load_features_csv(path("f.csv"), std::string("label"));
    ASSERT_EQ(fm.rows(), 3u);
    ASSERT_EQ(fm.dims(), 2u);
    EXPECT_EQ(fm.values(1, 0), -3.0);
    EXPECT_EQ(fm.values(1, 1), 0.4);
    EXPECT_EQ(fm.labels, (std::vector<ClassId>{0, 1, 1}));

    write("nohead.csv", "1,2\n3,4\r\n\n5,6\n");
    const FeatureMatrix plain = io::load_features_csv(path("nohead.csv"));
    EXPECT_EQ(plain.rows(), 3u);
    EXPECT_FALSE(plain.has_labels());
}

TEST_F(IoTest, FeaturesCsvErrors) {
    write("ragged.csv", "a,b\n1,2\n3\n");
    try {
        io::load_features_csv(path("ragged.csv"));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    write("nan.csv", "1,2\n3,x\n");
    EXPECT_THROW(io::load_features_csv(path("nan.csv")), ParseError);
    write("empty.csv", "");
    EXPECT_THROW(io::load_features_csv(path("empty.csv")), ParseError);
    write("nolabel.csv", "a,b\n1,2\n");
    EXPECT_THROW(io::load_features_csv(path("nolabel.csv"), std::string("label")), ParseError);
    write("badlabel.csv", "a,label\n1,2.5\n");
    EXPECT_THROW(io::load_features_csv(path("badlabel.csv"), std::string("label")), ParseError);
}

TEST_F(IoTest, FeaturesCsvRoundTrip) {
    const FeatureMatrix fm = oracle::gaussian_classes(3, 4, 12, 1.0, 9);
    io::save_features_csv(path("f.csv"), fm);
    const FeatureMatrix back = io::load_features_csv(path("f.csv"), std::string("label"));
    EXPECT_EQ(back.values, fm.values);
    EXPECT_EQ(back.labels, fm.labels);
}

TEST_F(IoTest, Idx) {
    std::string images = be32(0x803) + be32(3) + be32(2) + be32(2);
    for (int i = 0; i < 12; ++i) images += static_cast<char>(i * 20);
    std::string labels = be32(0x801) + be32(3) + std::string{7, 0, 9};
    write("img", images);
    write("lab", labels);
    const FeatureMatrix fm = io::load_idx(path("img"), path("lab"));
    EXPECT_EQ(fm.rows(), 3u);
    EXPECT_EQ(fm.dims(), 4u);
    EXPECT_DOUBLE_EQ(fm.values(2, 3), 220.0 / 255.0);
    EXPECT_EQ(fm.labels, (std::vector<ClassId>{7, 0, 9}));

    write("img_trunc", images.substr(0, images.size() - 1));
    EXPECT_THROW(io::load_idx(path("img_trunc"), path("lab")), FormatError);
    write("lab_short", be32(0x801) + be32(2) + std::string{7, 0});
    EXPECT_THROW(io::load_idx(path("img"), path("lab_short")), FormatError);
    EXPECT_THROW(io::load_idx(path("lab"), path("img")), FormatError);
}

TEST_F(IoTest, MnistTestSetIfPresent) {
    const char* dir = std::getenv("BITWEIGHT_MNIST_DIR");
    if (dir == nullptr || !fs::exists(fs::path(dir) / "t10k-images-idx3-ubyte")) GTEST_SKIP() << "MNIST not available";
    const FeatureMatrix fm = io::load_idx(fs::path(dir) / "t10k-images-idx3-ubyte", fs::path(dir) / "t10k-labels-idx1-ubyte");
    EXPECT_EQ(fm.rows(), 10000u);
    EXPECT_EQ(fm.dims(), 784u);
}

TEST_F(IoTest, ReportCsv) {
    PRCurve c;
    c.points = {{0.5, 1.0}, {1.0, 2.0 / 3.0}};
    io::save_pr_csv(path("pr.csv"), c);
    EXPECT_EQ(read("pr.csv"), "rank,precision,recall\n1,1,0.5\n2,0.6666666666666666,1\n");
    EvalReport r;
    r.code_type = "lsh";
    r.bits = 32;
    r.mode = "weighted";
    r.map = 0.25;
    r.ap = {0.25};
    EXPECT_EQ(io::summary_csv({r}), "code_type,bits,mode,map,queries,skipped\nlsh,32,weighted,0.25,1,0\n");
}
