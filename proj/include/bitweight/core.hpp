#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bitweight/error.hpp"

namespace bitweight {

using Word = std::uint64_t;
using ClassId = std::uint32_t;

inline constexpr std::size_t kWordBits = 64;
inline constexpr std::size_t kMaxBits = 1024;

constexpr std::size_t words_for(std::size_t bits) noexcept {
    return (bits + kWordBits - 1) / kWordBits;
}

/// Mask of the valid bits in the last word of a `bits`-long row.
constexpr Word tail_mask(std::size_t bits) noexcept {
    const std::size_t rem = bits % kWordBits;
    return rem == 0 ? ~Word{0} : ((Word{1} << rem) - 1);
}

inline void check_bit_length(std::size_t bits) {
    if (bits == 0 || bits > kMaxBits) {
        throw std::invalid_argument("bit length must be in [1, 1024], got " + std::to_string(bits));
    }
}

/// Non-owning view over a packed row of bits. Bit k lives in word k / 64 at
/// position k % 64 (LSB-first); padding bits past `size()` are zero.
class BitsView {
public:
    BitsView() = default;
    BitsView(std::size_t bits, std::span<const Word> words) : bits_(bits), words_(words) {}

    std::size_t size() const noexcept { return bits_; }
    std::span<const Word> words() const noexcept { return words_; }

    bool operator[](std::size_t k) const noexcept {
        return (words_[k / kWordBits] >> (k % kWordBits)) & 1U;
    }

    std::size_t popcount() const noexcept {
        std::size_t n = 0;
        for (Word w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

private:
    std::size_t bits_ = 0;
    std::span<const Word> words_;
};

/// Owning packed bit row. The tag keeps codes and code differences apart in
/// the type system while sharing one layout.
template <typename Tag>
class PackedBits {
public:
    PackedBits() = default;

    explicit PackedBits(std::size_t bits) : bits_(bits), words_(words_for(bits), 0) {
        check_bit_length(bits);
    }

    /// Copies `words`; any set padding bit is rejected.
    PackedBits(std::size_t bits, std::span<const Word> words) : PackedBits(bits) {
        if (words.size() != words_.size()) {
            throw std::invalid_argument("word count does not match bit length");
        }
        std::copy(words.begin(), words.end(), words_.begin());
        if ((words_.back() & ~tail_mask(bits_)) != 0) {
            throw std::invalid_argument("padding bits must be zero");
        }
    }

    explicit PackedBits(BitsView view) : PackedBits(view.size(), view.words()) {}

    /// Parses a string of '0'/'1' characters; character k is bit k.
    static PackedBits from_string(std::string_view s) {
        PackedBits out(s.size());
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (s[k] == '1') {
                out.set(k, true);
            } else if (s[k] != '0') {
                throw std::invalid_argument("bit string may only contain '0' and '1'");
            }
        }
        return out;
    }

    std::size_t size() const noexcept { return bits_; }
    std::span<const Word> words() const noexcept { return words_; }
    std::span<Word> mutable_words() noexcept { return words_; }

    bool operator[](std::size_t k) const noexcept { return view()[k]; }

    void set(std::size_t k, bool value) {
        if (k >= bits_) throw std::out_of_range("bit index out of range");
        const Word mask = Word{1} << (k % kWordBits);
        if (value) {
            words_[k / kWordBits] |= mask;
        } else {
            words_[k / kWordBits] &= ~mask;
        }
    }

    std::size_t popcount() const noexcept { return view().popcount(); }

    std::string to_string() const {
        std::string s(bits_, '0');
        for (std::size_t k = 0; k < bits_; ++k) {
            if ((*this)[k]) s[k] = '1';
        }
        return s;
    }

    BitsView view() const noexcept { return BitsView(bits_, words_); }
    operator BitsView() const noexcept { return view(); }  // NOLINT(google-explicit-constructor)

    friend bool operator==(const PackedBits&, const PackedBits&) = default;

private:
    std::size_t bits_ = 0;
    std::vector<Word> words_;
};

struct CodeTag {};
struct AcdvTag {};

using BinaryCode = PackedBits<CodeTag>;
/// Absolute code difference vector: the XOR of two codes.
using Acdv = PackedBits<AcdvTag>;

/// N labelled codes of uniform length, stored contiguously row by row.
class CodeDatabase {
public:
    CodeDatabase() = default;

    explicit CodeDatabase(std::size_t bits) : bits_(bits), stride_(words_for(bits)) {
        check_bit_length(bits);
    }

    CodeDatabase(std::size_t bits, std::vector<Word> words, std::vector<ClassId> labels)
        : CodeDatabase(bits) {
        if (words.size() != labels.size() * stride_) {
            throw std::invalid_argument("code block size does not match label count");
        }
        words_ = std::move(words);
        labels_ = std::move(labels);
        const Word pad = ~tail_mask(bits_);
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if ((words_[(i + 1) * stride_ - 1] & pad) != 0) {
                throw std::invalid_argument("padding bits must be zero");
            }
        }
    }

    void push_back(BitsView code, ClassId label) {
        if (code.size() != bits_) {
            throw std::invalid_argument("code length " + std::to_string(code.size()) +
                                        " does not match database length " + std::to_string(bits_));
        }
        words_.insert(words_.end(), code.words().begin(), code.words().end());
        labels_.push_back(label);
    }

    std::size_t bits() const noexcept { return bits_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t words_per_code() const noexcept { return stride_; }

    BitsView code(std::size_t i) const {
        if (i >= size()) throw std::invalid_argument("code index " + std::to_string(i) + " out of range");
        return BitsView(bits_, std::span<const Word>(words_).subspan(i * stride_, stride_));
    }

    ClassId label(std::size_t i) const {
        if (i >= size()) throw std::invalid_argument("label index " + std::to_string(i) + " out of range");
        return labels_[i];
    }

    std::span<const Word> words() const noexcept { return words_; }
    std::span<const ClassId> labels() const noexcept { return labels_; }

    friend bool operator==(const CodeDatabase&, const CodeDatabase&) = default;

private:
    std::size_t bits_ = 0;
    std::size_t stride_ = 0;
    std::vector<Word> words_;
    std::vector<ClassId> labels_;
};

/// Non-negative, finite per-bit weights.
class BitWeights {
public:
    BitWeights() = default;

    explicit BitWeights(std::vector<double> values) : values_(std::move(values)) {
        check_bit_length(values_.size());
        for (std::size_t k = 0; k < values_.size(); ++k) {
            if (!std::isfinite(values_[k]) || values_[k] < 0.0) {
                throw std::invalid_argument("weight " + std::to_string(k) + " must be finite and non-negative");
            }
        }
    }

    static BitWeights ones(std::size_t bits) { return BitWeights(std::vector<double>(bits, 1.0)); }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t k) const noexcept { return values_[k]; }
    std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const BitWeights&, const BitWeights&) = default;

private:
    std::vector<double> values_;
};

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                                    std::to_string(b) + ")");
    }
}

/// Sum of weights over the set bits of a packed row, visited in ascending bit
/// order. Equal to the dense sum of w_k * bit_k since the skipped terms are 0.
inline double masked_sum(std::span<const double> w, std::span<const Word> words) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < words.size(); ++i) {
        Word x = words[i];
        const double* base = w.data() + i * kWordBits;
        while (x != 0) {
            sum += base[std::countr_zero(x)];
            x &= x - 1;
        }
    }
    return sum;
}

inline double masked_xor_sum(std::span<const double> w, std::span<const Word> a, std::span<const Word> b) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        Word x = a[i] ^ b[i];
        const double* base = w.data() + i * kWordBits;
        while (x != 0) {
            sum += base[std::countr_zero(x)];
            x &= x - 1;
        }
    }
    return sum;
}

}  // namespace detail

inline std::size_t hamming(BitsView a, BitsView b) {
    detail::require_same_length(a.size(), b.size(), "hamming");
    std::size_t d = 0;
    const auto wa = a.words();
    const auto wb = b.words();
    for (std::size_t i = 0; i < wa.size(); ++i) d += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
    return d;
}

inline Acdv acdv(BitsView a, BitsView b) {
    detail::require_same_length(a.size(), b.size(), "acdv");
    Acdv out(a.size());
    auto dst = out.mutable_words();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = a.words()[i] ^ b.words()[i];
    return out;
}

/// w^T acdv(a, b).
inline double weighted_hamming(const BitWeights& w, BitsView a, BitsView b) {
    detail::require_same_length(w.size(), a.size(), "weighted_hamming");
    detail::require_same_length(a.size(), b.size(), "weighted_hamming");
    return detail::masked_xor_sum(w.values(), a.words(), b.words());
}

/// w^T d for a precomputed difference vector.
inline double weighted_sum(std::span<const double> w, BitsView d) {
    detail::require_same_length(w.size(), d.size(), "weighted_sum");
    return detail::masked_sum(w, d.words());
}

}  // namespace bitweight
