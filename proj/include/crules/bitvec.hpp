#pragma once

#include <bit>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace crules {

/// Fixed-size bit vector over 64-bit words. Unit coverage sets are stored as
/// one BitVec per literal; rule coverage is the AND of its literals' rows.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t n, bool fill = false)
      : n_(n), words_((n + 63) / 64, fill ? ~0ull : 0ull) {
    clear_tail();
  }

  std::size_t size() const { return n_; }
  std::size_t num_words() const { return words_.size(); }

  bool test(std::size_t i) const {
    assert(i < n_);
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  void set(std::size_t i) {
    assert(i < n_);
    words_[i >> 6] |= (1ull << (i & 63));
  }
  void reset(std::size_t i) {
    assert(i < n_);
    words_[i >> 6] &= ~(1ull << (i & 63));
  }
  void set_all() {
    for (auto& w : words_) w = ~0ull;
    clear_tail();
  }
  void reset_all() {
    for (auto& w : words_) w = 0ull;
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += std::popcount(w);
    return c;
  }
  bool any() const {
    for (auto w : words_) if (w) return true;
    return false;
  }
  bool none() const { return !any(); }

  BitVec& operator&=(const BitVec& o) {
    assert(n_ == o.n_);
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] &= o.words_[k];
    return *this;
  }
  BitVec& operator|=(const BitVec& o) {
    assert(n_ == o.n_);
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= o.words_[k];
    return *this;
  }
  /// this &= ~o
  BitVec& and_not(const BitVec& o) {
    assert(n_ == o.n_);
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] &= ~o.words_[k];
    return *this;
  }
  BitVec operator~() const {
    BitVec r = *this;
    for (auto& w : r.words_) w = ~w;
    r.clear_tail();
    return r;
  }

  static void and_of(BitVec& dst, const BitVec& a, const BitVec& b) {
    assert(a.n_ == b.n_);
    dst.n_ = a.n_;
    dst.words_.resize(a.words_.size());
    for (std::size_t k = 0; k < a.words_.size(); ++k)
      dst.words_[k] = a.words_[k] & b.words_[k];
  }

  std::size_t count_and(const BitVec& o) const {
    assert(n_ == o.n_);
    std::size_t c = 0;
    for (std::size_t k = 0; k < words_.size(); ++k)
      c += std::popcount(words_[k] & o.words_[k]);
    return c;
  }
  std::size_t count_or(const BitVec& o) const {
    assert(n_ == o.n_);
    std::size_t c = 0;
    for (std::size_t k = 0; k < words_.size(); ++k)
      c += std::popcount(words_[k] | o.words_[k]);
    return c;
  }

  bool operator==(const BitVec& o) const = default;

  /// Calls f(i) for every set bit, in increasing index order.
  template <class F>
  void for_each_set(F&& f) const {
    for (std::size_t k = 0; k < words_.size(); ++k) {
      std::uint64_t w = words_[k];
      while (w) {
        const unsigned b = std::countr_zero(w);
        f(k * 64 + b);
        w &= w - 1;
      }
    }
  }

  const std::vector<std::uint64_t>& words() const { return words_; }
  std::uint64_t word(std::size_t k) const { return words_[k]; }

 private:
  void clear_tail() {
    if (n_ % 64 != 0 && !words_.empty())
      words_.back() &= (~0ull >> (64 - (n_ % 64)));
  }

  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace crules
