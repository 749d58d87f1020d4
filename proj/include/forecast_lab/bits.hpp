#pragma once

#include <bit>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"

namespace forecast_lab {

using Bit = std::uint8_t;

/// Append-only binary trajectory x_0, x_1, ... stored 64 symbols per word.
class BitSequence {
public:
    BitSequence() = default;

    BitSequence(std::initializer_list<int> bits) {
        for (int b : bits) push_back(static_cast<Bit>(b));
    }

    explicit BitSequence(std::span<const Bit> bits) {
        words_.reserve(bits.size() / 64 + 1);
        for (Bit b : bits) push_back(b);
    }

    std::size_t size() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }

    void push_back(Bit b) {
        assert(b <= 1);
        if ((size_ & 63) == 0) words_.push_back(0);
        if (b) words_.back() |= std::uint64_t{1} << (size_ & 63);
        ++size_;
    }

    void reserve(std::size_t n) { words_.reserve(n / 64 + 1); }

    Bit operator[](std::size_t i) const noexcept {
        assert(i < size_);
        return static_cast<Bit>((words_[i >> 6] >> (i & 63)) & 1u);
    }

    /// Bits end-len+1 .. end packed with x_end in the least significant position.
    /// Requires 1 <= len <= 64 and len <= end+1.
    std::uint64_t window(std::size_t end, std::size_t len) const noexcept {
        assert(len >= 1 && len <= 64 && len <= end + 1 && end < size_);
        std::uint64_t w = 0;
        for (std::size_t i = end + 1 - len; i <= end; ++i) w = (w << 1) | (*this)[i];
        return w;
    }

    /// True iff the length-len blocks ending at end_a and end_b coincide.
    bool blocks_equal(std::size_t end_a, std::size_t end_b, std::size_t len) const noexcept {
        assert(len <= end_a + 1 && len <= end_b + 1);
        for (std::size_t i = 0; i < len; ++i) {
            if ((*this)[end_a - i] != (*this)[end_b - i]) return false;
        }
        return true;
    }

    std::size_t count_ones() const noexcept {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    std::vector<Bit> to_vector() const {
        std::vector<Bit> out(size_);
        for (std::size_t i = 0; i < size_; ++i) out[i] = (*this)[i];
        return out;
    }

    /// Copy of x_first .. x_last inclusive.
    std::vector<Bit> slice(std::size_t first, std::size_t last) const {
        assert(first <= last && last < size_);
        std::vector<Bit> out;
        out.reserve(last - first + 1);
        for (std::size_t i = first; i <= last; ++i) out.push_back((*this)[i]);
        return out;
    }

    friend bool operator==(const BitSequence& a, const BitSequence& b) {
        return a.size_ == b.size_ && a.words_ == b.words_;
    }

private:
    std::vector<std::uint64_t> words_;
    std::size_t size_ = 0;
};

/// Pull interface over a stream of binary symbols.
class BitSource {
public:
    virtual ~BitSource() = default;

    /// Next symbol, or nullopt once a finite source is exhausted.
    virtual std::optional<Bit> next() = 0;
};

/// Replays a fixed finite sequence, then reports exhaustion.
class FiniteSource final : public BitSource {
public:
    explicit FiniteSource(std::vector<Bit> bits) : bits_(std::move(bits)) {}
    FiniteSource(std::initializer_list<int> bits) {
        for (int b : bits) bits_.push_back(static_cast<Bit>(b));
    }

    std::optional<Bit> next() override {
        if (pos_ >= bits_.size()) return std::nullopt;
        return bits_[pos_++];
    }

private:
    std::vector<Bit> bits_;
    std::size_t pos_ = 0;
};

/// Repeats a finite pattern forever: pattern[0], pattern[1], ..., pattern[0], ...
class PeriodicSource final : public BitSource {
public:
    explicit PeriodicSource(std::vector<Bit> pattern) : pattern_(std::move(pattern)) {
        if (pattern_.empty()) throw InvalidSpec("periodic source needs a nonempty pattern");
    }
    PeriodicSource(std::initializer_list<int> pattern)
        : PeriodicSource(std::vector<Bit>(pattern.begin(), pattern.end())) {}

    std::optional<Bit> next() override {
        Bit b = pattern_[pos_];
        pos_ = (pos_ + 1) % pattern_.size();
        return b;
    }

private:
    std::vector<Bit> pattern_;
    std::size_t pos_ = 0;
};

}  // namespace forecast_lab
