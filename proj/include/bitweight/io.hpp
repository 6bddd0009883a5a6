#pragma once

// File formats. All multi-byte integers and reals are little-endian except in
// IDX files, which are big-endian by definition.
//
//   codes    (BCOD)  32-byte header: "BCOD" u32 version u64 N u32 K, zero pad
//                    then N rows of ceil(K/64) u64 words (bit k of a row is
//                    bit k%64 of word k/64), then N u32 labels
//   weights  (BWGT)  "BWGT" u32 version u32 K, then K f64
//   model    (BHSH)  32-byte header: "BHSH" u32 version u32 kind u32 D u32 K
//                    u32 0 u64 seed; then mean (D f64), projection (D*K f64,
//                    row-major), rotation (K*K f64, row-major)
//   triplets (BTRP)  32-byte header: "BTRP" u32 version u32 K u32 flags
//                    u64 count u64 seed; per triplet: if flags bit 0, four
//                    u64 source indices (i, j, k, s); then the three ACDVs
//                    (dissimilar, similar, similar) as code rows

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bitweight/core.hpp"
#include "bitweight/error.hpp"
#include "bitweight/eval.hpp"
#include "bitweight/hashing.hpp"
#include "bitweight/sampler.hpp"

namespace bitweight::io {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 32;

namespace detail {

class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u32(std::uint32_t v) { le(v); }
    void u64(std::uint64_t v) { le(v); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
    void pad_to(std::size_t n) {
        if (buf_.size() < n) buf_.resize(n, '\0');
    }
    const std::string& data() const noexcept { return buf_; }

private:
    template <typename T>
    void le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

    std::string_view bytes(std::size_t n) {
        need(n);
        std::string_view out(data_.data() + pos_, n);
        pos_ += n;
        return out;
    }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
    std::uint32_t be32() {
        need(4);
        std::uint32_t v = 0;
        for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(data_[pos_ + i]);
        pos_ += 4;
        return v;
    }
    void seek(std::size_t pos) {
        if (pos > data_.size()) fail("truncated header");
        pos_ = pos;
    }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    void expect_remaining(std::size_t n) const {
        if (remaining() < n) fail("truncated: expected " + std::to_string(n) + " more bytes, found " + std::to_string(remaining()));
        if (remaining() > n) fail("unexpected trailing bytes");
    }
    [[noreturn]] void fail(const std::string& what) const { throw FormatError(name_ + ": " + what); }

private:
    void need(std::size_t n) const {
        if (remaining() < n) fail("truncated file");
    }
    template <typename T>
    T le() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return v;
    }

    std::string data_;
    std::string name_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline void read_magic(ByteReader& r, std::string_view magic) {
    if (r.bytes(4) != magic) r.fail("bad magic, expected " + std::string(magic));
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) r.fail("unsupported format version " + std::to_string(version));
}

inline std::size_t read_bits(ByteReader& r) {
    const std::uint32_t k = r.u32();
    if (k == 0 || k > kMaxBits) r.fail("bit length " + std::to_string(k) + " outside [1, 1024]");
    return k;
}

inline void write_row(ByteWriter& w, BitsView bits) {
    for (Word word : bits.words()) w.u64(word);
}

template <typename Tag>
PackedBits<Tag> read_row(ByteReader& r, std::size_t bits) {
    std::vector<Word> words(words_for(bits));
    for (auto& word : words) word = r.u64();
    if ((words.back() & ~tail_mask(bits)) != 0) r.fail("nonzero padding bits");
    return PackedBits<Tag>(bits, words);
}

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

}  // namespace detail

// ---- codes -------------------------------------------------------------------

inline void save_codes(const std::filesystem::path& path, const CodeDatabase& db) {
    detail::ByteWriter w;
    w.bytes("BCOD");
    w.u32(kFormatVersion);
    w.u64(db.size());
    w.u32(static_cast<std::uint32_t>(db.bits()));
    w.pad_to(kHeaderBytes);
    for (Word word : db.words()) w.u64(word);
    for (ClassId c : db.labels()) w.u32(c);
    detail::write_file(path, w.data());
}

inline CodeDatabase load_codes(const std::filesystem::path& path) {
    detail::ByteReader r(detail::read_file(path), path.string());
    detail::read_magic(r, "BCOD");
    const std::uint64_t n = r.u64();
    const std::size_t bits = detail::read_bits(r);
    r.seek(kHeaderBytes);
    if (n == 0) r.fail("code file holds no codes");
    const std::size_t stride = words_for(bits);
    if (n > r.remaining() / (stride * 8 + 4)) r.fail("truncated code block");
    r.expect_remaining(n * (stride * 8 + 4));

    std::vector<Word> words(n * stride);
    for (auto& word : words) word = r.u64();
    std::vector<ClassId> labels(n);
    for (auto& c : labels) c = r.u32();
    const Word pad = ~tail_mask(bits);
    for (std::size_t i = 0; i < n; ++i) {
        if ((words[(i + 1) * stride - 1] & pad) != 0) r.fail("nonzero padding bits in code " + std::to_string(i));
    }
    return CodeDatabase(bits, std::move(words), std::move(labels));
}

// ---- weights -----------------------------------------------------------------

inline void save_weights(const std::filesystem::path& path, const BitWeights& weights) {
    detail::ByteWriter w;
    w.bytes("BWGT");
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(weights.size()));
    for (double v : weights.values()) w.f64(v);
    detail::write_file(path, w.data());
}

inline BitWeights load_weights(const std::filesystem::path& path) {
    detail::ByteReader r(detail::read_file(path), path.string());
    detail::read_magic(r, "BWGT");
    const std::size_t bits = detail::read_bits(r);
    r.expect_remaining(bits * 8);
    std::vector<double> values(bits);
    for (std::size_t k = 0; k < bits; ++k) {
        values[k] = r.f64();
        if (!std::isfinite(values[k]) || values[k] < 0.0) {
            r.fail("weight " + std::to_string(k) + " is negative or not finite");
        }
    }
    return BitWeights(std::move(values));
}

/// One weight per line, for inspection.
inline void save_weights_text(const std::filesystem::path& path, const BitWeights& weights) {
    std::string out;
    for (double v : weights.values()) out += detail::format_double(v) + "\n";
    detail::write_file(path, out);
}

// ---- hash model --------------------------------------------------------------

inline void save_model(const std::filesystem::path& path, const HashModel& model) {
    model.validate();
    detail::ByteWriter w;
    w.bytes("BHSH");
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(model.kind));
    w.u32(static_cast<std::uint32_t>(model.dims()));
    w.u32(static_cast<std::uint32_t>(model.bits()));
    w.u32(0);
    w.u64(model.seed);
    for (Eigen::Index i = 0; i < model.mean.size(); ++i) w.f64(model.mean(i));
    for (Eigen::Index r = 0; r < model.projection.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.projection.cols(); ++c) w.f64(model.projection(r, c));
    }
    for (Eigen::Index r = 0; r < model.rotation.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.rotation.cols(); ++c) w.f64(model.rotation(r, c));
    }
    detail::write_file(path, w.data());
}

inline HashModel load_model(const std::filesystem::path& path) {
    detail::ByteReader r(detail::read_file(path), path.string());
    detail::read_magic(r, "BHSH");
    const std::uint32_t kind = r.u32();
    if (kind > 1) r.fail("unknown hash kind " + std::to_string(kind));
    const std::uint32_t d = r.u32();
    if (d == 0) r.fail("model has zero input dimensions");
    const std::size_t k = detail::read_bits(r);
    r.u32();
    HashModel model;
    model.kind = static_cast<HashKind>(kind);
    model.seed = r.u64();
    const std::uint64_t count = std::uint64_t{d} + std::uint64_t{d} * k + std::uint64_t{k} * k;
    if (count > r.remaining() / 8) r.fail("truncated model payload");
    r.expect_remaining(count * 8);

    const auto D = static_cast<Eigen::Index>(d);
    const auto K = static_cast<Eigen::Index>(k);
    model.mean.resize(D);
    for (Eigen::Index i = 0; i < D; ++i) model.mean(i) = r.f64();
    model.projection.resize(D, K);
    for (Eigen::Index row = 0; row < D; ++row) {
        for (Eigen::Index c = 0; c < K; ++c) model.projection(row, c) = r.f64();
    }
    model.rotation.resize(K, K);
    for (Eigen::Index row = 0; row < K; ++row) {
        for (Eigen::Index c = 0; c < K; ++c) model.rotation(row, c) = r.f64();
    }
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        r.fail(e.what());
    }
    return model;
}

// ---- triplets ----------------------------------------------------------------

inline constexpr std::uint32_t kTripletsHaveSources = 1;

inline void save_triplets(const std::filesystem::path& path, const TripletBatch& batch, std::size_t bits = 0) {
    if (bits == 0) bits = batch.bits();
    check_bit_length(bits);
    const bool with_sources = batch.sources.size() == batch.triplets.size() && !batch.empty();
    detail::ByteWriter w;
    w.bytes("BTRP");
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(bits));
    w.u32(with_sources ? kTripletsHaveSources : 0);
    w.u64(batch.size());
    w.u64(batch.seed);
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const auto& tri = batch.triplets[t];
        if (tri.bits() != bits || tri.similar_a.size() != bits || tri.similar_b.size() != bits) {
            throw std::invalid_argument("triplet length does not match batch length");
        }
        if (with_sources) {
            for (std::size_t idx : batch.sources[t].indices()) w.u64(idx);
        }
        detail::write_row(w, tri.dissimilar);
        detail::write_row(w, tri.similar_a);
        detail::write_row(w, tri.similar_b);
    }
    detail::write_file(path, w.data());
}

/// Streams a triplet file in chunks so that consumers can hold a bounded
/// number of triplets in memory.
class TripletReader {
public:
    explicit TripletReader(const std::filesystem::path& path) : in_(path, std::ios::binary), name_(path.string()) {
        if (!in_) throw std::runtime_error("cannot open " + name_);
        detail::ByteReader r(read_exact(kHeaderBytes), name_);
        detail::read_magic(r, "BTRP");
        bits_ = detail::read_bits(r);
        const std::uint32_t flags = r.u32();
        if ((flags & ~kTripletsHaveSources) != 0) r.fail("unknown flags");
        with_sources_ = (flags & kTripletsHaveSources) != 0;
        count_ = r.u64();
        seed_ = r.u64();

        const auto here = in_.tellg();
        in_.seekg(0, std::ios::end);
        const auto size = static_cast<std::uint64_t>(in_.tellg() - here);
        in_.seekg(here);
        const std::uint64_t per = record_bytes();
        if (count_ > size / per || count_ * per != size) {
            throw FormatError(name_ + ": payload size does not match triplet count");
        }
    }

    std::size_t bits() const noexcept { return bits_; }
    std::uint64_t count() const noexcept { return count_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t remaining() const noexcept { return count_ - consumed_; }

    /// Up to `max` further triplets; empty once the file is exhausted.
    TripletBatch next(std::size_t max) {
        TripletBatch batch;
        batch.seed = seed_;
        const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(max, remaining()));
        if (n == 0) return batch;
        detail::ByteReader r(read_exact(n * record_bytes()), name_);
        batch.triplets.reserve(n);
        for (std::size_t t = 0; t < n; ++t) {
            if (with_sources_) {
                Quadruplet q;
                q.query = r.u64();
                q.dissimilar = r.u64();
                q.similar_a = r.u64();
                q.similar_b = r.u64();
                batch.sources.push_back(q);
            }
            AcdvTriplet tri;
            tri.dissimilar = detail::read_row<AcdvTag>(r, bits_);
            tri.similar_a = detail::read_row<AcdvTag>(r, bits_);
            tri.similar_b = detail::read_row<AcdvTag>(r, bits_);
            batch.triplets.push_back(std::move(tri));
        }
        consumed_ += n;
        return batch;
    }

private:
    std::uint64_t record_bytes() const noexcept {
        return (with_sources_ ? 32 : 0) + 3 * 8 * words_for(bits_);
    }

    std::string read_exact(std::size_t n) {
        std::string buf(n, '\0');
        in_.read(buf.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(name_ + ": truncated file");
        return buf;
    }

    std::ifstream in_;
    std::string name_;
    std::size_t bits_ = 0;
    bool with_sources_ = false;
    std::uint64_t count_ = 0;
    std::uint64_t seed_ = 0;
    std::uint64_t consumed_ = 0;
};

inline TripletBatch load_triplets(const std::filesystem::path& path) {
    TripletReader reader(path);
    TripletBatch batch = reader.next(static_cast<std::size_t>(reader.count()));
    std::set<Quadruplet> seen;
    for (const auto& q : batch.sources) {
        if (!seen.insert(q).second) throw FormatError(path.string() + ": duplicate source quadruplet");
    }
    return batch;
}

/// Input range over a triplet file in minibatches of at most `size`.
class TripletChunks {
public:
    TripletChunks(const std::filesystem::path& path, std::size_t size) : reader_(path), size_(size) {
        if (size == 0) throw std::invalid_argument("chunk size must be >= 1");
    }

    class iterator {
    public:
        using value_type = TripletBatch;
        using difference_type = std::ptrdiff_t;

        iterator() = default;
        explicit iterator(TripletChunks* owner) : owner_(owner) { advance(); }

        const TripletBatch& operator*() const { return current_; }
        iterator& operator++() {
            advance();
            return *this;
        }
        void operator++(int) { advance(); }
        friend bool operator==(const iterator& it, std::default_sentinel_t) { return it.owner_ == nullptr; }

    private:
        void advance() {
            current_ = owner_->reader_.next(owner_->size_);
            if (current_.empty()) owner_ = nullptr;
        }
        TripletChunks* owner_ = nullptr;
        TripletBatch current_;
    };

    iterator begin() { return iterator(this); }
    std::default_sentinel_t end() const { return {}; }
    std::size_t bits() const noexcept { return reader_.bits(); }

private:
    TripletReader reader_;
    std::size_t size_;
};

// ---- features ----------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            cells.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return cells;
}

inline bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Reads a comma-separated numeric table. A first row with any non-numeric
/// cell is taken as a header. When `label_column` names a header column, its
/// cells must be non-negative integers and become the row labels.
inline FeatureMatrix load_features_csv(const std::filesystem::path& path,
                                       const std::optional<std::string>& label_column = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());

    std::vector<std::vector<double>> rows;
    std::vector<ClassId> labels;
    std::optional<std::size_t> label_pos;
    std::size_t arity = 0;
    bool first = true;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv(line);
        if (first) {
            first = false;
            arity = cells.size();
            double tmp;
            const bool header = std::any_of(cells.begin(), cells.end(), [&](auto c) { return !detail::parse_double(c, tmp); });
            if (header) {
                if (label_column) {
                    const auto it = std::find(cells.begin(), cells.end(), std::string_view(*label_column));
                    if (it == cells.end()) throw ParseError(lineno, "missing label column '" + *label_column + "'");
                    label_pos = static_cast<std::size_t>(it - cells.begin());
                }
                continue;
            }
            if (label_column) throw ParseError(lineno, "label column '" + *label_column + "' requested but file has no header");
        }
        if (cells.size() != arity) {
            throw ParseError(lineno, "expected " + std::to_string(arity) + " fields, found " + std::to_string(cells.size()));
        }
        std::vector<double> row;
        row.reserve(arity);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v;
            if (!detail::parse_double(cells[c], v) || !std::isfinite(v)) {
                throw ParseError(lineno, "non-numeric value '" + std::string(cells[c]) + "' in column " + std::to_string(c + 1));
            }
            if (label_pos && c == *label_pos) {
                if (v < 0.0 || v != std::floor(v) || v > 4294967295.0) {
                    throw ParseError(lineno, "label must be a non-negative integer");
                }
                labels.push_back(static_cast<ClassId>(v));
            } else {
                row.push_back(v);
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(lineno == 0 ? 1 : lineno, "no data rows in " + path.string());
    const std::size_t dims = rows.front().size();
    if (dims == 0) throw ParseError(1, "no feature columns");

    FeatureMatrix fm;
    fm.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dims));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < dims; ++c) fm.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    fm.labels = std::move(labels);
    return fm;
}

/// Writes features with a header row (f0, f1, ..., label when labelled).
inline void save_features_csv(const std::filesystem::path& path, const FeatureMatrix& fm) {
    std::string out;
    for (std::size_t c = 0; c < fm.dims(); ++c) out += (c ? ",f" : "f") + std::to_string(c);
    if (fm.has_labels()) out += ",label";
    out += '\n';
    for (std::size_t r = 0; r < fm.rows(); ++r) {
        for (std::size_t c = 0; c < fm.dims(); ++c) {
            if (c) out += ',';
            out += detail::format_double(fm.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        }
        if (fm.has_labels()) out += "," + std::to_string(fm.labels[r]);
        out += '\n';
    }
    detail::write_file(path, out);
}

/// MNIST-style IDX pair: unsigned-byte images (magic 0x00000803) and labels
/// (0x00000801). Pixels are scaled to [0, 1].
inline FeatureMatrix load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    detail::ByteReader img(detail::read_file(images_path), images_path.string());
    if (img.be32() != 0x00000803) img.fail("bad IDX image magic");
    const std::uint32_t n = img.be32();
    const std::uint32_t rows = img.be32();
    const std::uint32_t cols = img.be32();
    const std::uint64_t dims = std::uint64_t{rows} * cols;
    if (dims == 0) img.fail("zero-sized images");
    if (n > img.remaining() / dims) img.fail("truncated image data");
    img.expect_remaining(n * dims);

    detail::ByteReader lab(detail::read_file(labels_path), labels_path.string());
    if (lab.be32() != 0x00000801) lab.fail("bad IDX label magic");
    const std::uint32_t ln = lab.be32();
    if (ln != n) lab.fail("label count " + std::to_string(ln) + " does not match image count " + std::to_string(n));
    lab.expect_remaining(n);

    FeatureMatrix fm;
    fm.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
    const std::string_view pixels = img.bytes(n * dims);
    for (std::uint64_t i = 0; i < n; ++i) {
        for (std::uint64_t j = 0; j < dims; ++j) {
            fm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                static_cast<unsigned char>(pixels[i * dims + j]) / 255.0;
        }
    }
    const std::string_view raw = lab.bytes(n);
    fm.labels.reserve(n);
    for (char c : raw) fm.labels.push_back(static_cast<unsigned char>(c));
    return fm;
}

// ---- reports -----------------------------------------------------------------

/// rank,precision,recall (rank is 1-based).
inline void save_pr_csv(const std::filesystem::path& path, const PRCurve& curve) {
    std::string out = "rank,precision,recall\n";
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        out += std::to_string(i + 1) + "," + detail::format_double(curve.points[i].precision) + "," +
               detail::format_double(curve.points[i].recall) + "\n";
    }
    detail::write_file(path, out);
}

/// code_type,bits,mode,map,queries,skipped, one row per report.
inline std::string summary_csv(const std::vector<EvalReport>& reports) {
    std::string out = "code_type,bits,mode,map,queries,skipped\n";
    for (const auto& r : reports) {
        out += r.code_type + "," + std::to_string(r.bits) + "," + r.mode + "," + detail::format_double(r.map) + "," +
               std::to_string(r.ap.size()) + "," + std::to_string(r.skipped) + "\n";
    }
    return out;
}

inline void save_summary_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
    detail::write_file(path, summary_csv(reports));
}

}  // namespace bitweight::io
