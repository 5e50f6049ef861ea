#pragma once

// Dyadic intervals (i 2^-k, (i+1) 2^-k] of (0, 1] for ranks up to 255. The index
// is a 256-bit unsigned integer held in four words, least significant first.

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "blil/error.hpp"

namespace blil {

class DyadicInterval {
 public:
  static constexpr int kMaxRank = 255;

  DyadicInterval() = default;

  DyadicInterval(int rank, std::uint64_t index) : rank_(rank) {
    if (rank < 0 || rank > kMaxRank) throw DomainError("dyadic rank out of range");
    if (rank < 64 && (index >> rank) != 0) throw DomainError("dyadic index >= 2^rank");
    bits_[0] = index;
  }

  /// The rank-k interval containing t in (0, 1], i.e. index ceil(t 2^k) - 1.
  static DyadicInterval containing(double t, int rank) {
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("point outside (0, 1]");
    if (rank < 0 || rank > kMaxRank) throw DomainError("dyadic rank out of range");
    int e = 0;
    const double m = std::frexp(t, &e);  // t = m 2^e, m in [1/2, 1)
    auto mant = static_cast<std::uint64_t>(std::ldexp(m, 53));
    // t 2^rank = mant 2^(e - 53 + rank)
    const int shift = e - 53 + rank;
    DyadicInterval out;
    out.rank_ = rank;
    if (shift >= 0) {
      out.bits_ = shl({mant, 0, 0, 0}, shift);
      out.decrement();
    } else {
      const int s = -shift;
      std::uint64_t floor = s >= 64 ? 0 : mant >> s;
      const bool exact = s >= 64 ? mant == 0 : (mant & ((std::uint64_t{1} << s) - 1)) == 0;
      out.bits_ = {exact ? floor - 1 : floor, 0, 0, 0};
    }
    return out;
  }

  /// Rank-k interval whose index is the low k bits of `words` (least significant first).
  static DyadicInterval from_words(int rank, std::array<std::uint64_t, 4> words) {
    if (rank < 0 || rank > kMaxRank) throw DomainError("dyadic rank out of range");
    DyadicInterval out;
    out.rank_ = rank;
    for (int w = 0; w < 4; ++w) {
      const int lo = 64 * w;
      if (rank <= lo) {
        words[w] = 0;
      } else if (rank < lo + 64) {
        words[w] &= (std::uint64_t{1} << (rank - lo)) - 1;
      }
    }
    out.bits_ = words;
    return out;
  }

  int rank() const noexcept { return rank_; }

  /// Index as a 64-bit integer; only for rank <= 63.
  std::uint64_t index() const {
    if (rank_ > 63) throw DomainError("index of a rank > 63 interval does not fit 64 bits");
    return bits_[0];
  }

  /// Which half of its parent: 0 for the left half, 1 for the right.
  int side() const noexcept { return static_cast<int>(bits_[0] & 1u); }

  /// Binary digit of the index at position `pos` (0 = least significant).
  int bit(int pos) const noexcept { return static_cast<int>((bits_[pos / 64] >> (pos % 64)) & 1u); }

  DyadicInterval parent() const {
    if (rank_ == 0) throw DomainError("the root has no parent");
    DyadicInterval p;
    p.rank_ = rank_ - 1;
    p.bits_ = shr(bits_, 1);
    return p;
  }

  DyadicInterval child(int side) const {
    if (rank_ == kMaxRank) throw DomainError("dyadic rank out of range");
    DyadicInterval c;
    c.rank_ = rank_ + 1;
    c.bits_ = shl(bits_, 1);
    c.bits_[0] |= static_cast<std::uint64_t>(side & 1);
    return c;
  }

  /// Ancestor at rank r <= rank().
  DyadicInterval ancestor(int r) const {
    if (r < 0 || r > rank_) throw DomainError("ancestor rank out of range");
    DyadicInterval a;
    a.rank_ = r;
    a.bits_ = shr(bits_, rank_ - r);
    return a;
  }

  /// Same-rank neighbour `delta` places to the right (left if negative), or
  /// nullopt when it falls outside (0, 1].
  std::optional<DyadicInterval> shifted(std::int64_t delta) const {
    DyadicInterval out = *this;
    const std::uint64_t mag = delta < 0 ? std::uint64_t(0) - std::uint64_t(delta) : std::uint64_t(delta);
    if (delta >= 0) {
      std::uint64_t carry = mag;
      for (auto& w : out.bits_) {
        const std::uint64_t before = w;
        w += carry;
        carry = w < before ? 1 : 0;
        if (!carry) break;
      }
      if (carry || !out.fits()) return std::nullopt;
    } else {
      std::uint64_t borrow = mag;
      for (auto& w : out.bits_) {
        const std::uint64_t before = w;
        w -= borrow;
        borrow = w > before ? 1 : 0;
        if (!borrow) break;
      }
      if (borrow) return std::nullopt;
    }
    return out;
  }

  double length() const { return std::ldexp(1.0, -rank_); }

  /// Left endpoint, rounded to double for deep ranks.
  double left() const {
    double s = 0.0;
    for (int w = 3; w >= 0; --w) s = s * 18446744073709551616.0 + static_cast<double>(bits_[w]);
    return std::ldexp(s, -rank_);
  }
  double right() const { return left() + length(); }
  double center() const { return left() + 0.5 * length(); }

  bool contains(double t) const { return t > left() && t <= right(); }

  /// Compact text key, e.g. "5:1a" (rank, hex index).
  std::string key() const {
    static const char* hex = "0123456789abcdef";
    std::string h;
    bool started = false;
    for (int w = 3; w >= 0; --w) {
      for (int nib = 15; nib >= 0; --nib) {
        const int d = static_cast<int>((bits_[w] >> (4 * nib)) & 0xF);
        if (d || started) {
          h.push_back(hex[d]);
          started = true;
        }
      }
    }
    if (h.empty()) h = "0";
    return std::to_string(rank_) + ":" + h;
  }

  /// Inverse of key().
  static DyadicInterval from_key(const std::string& key) {
    const auto colon = key.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == key.size()) {
      throw ParseError("dyadic key must be rank:hex", key);
    }
    int rank = 0;
    for (std::size_t i = 0; i < colon; ++i) {
      if (key[i] < '0' || key[i] > '9') throw ParseError("dyadic rank is not a number", key);
      rank = 10 * rank + (key[i] - '0');
      if (rank > kMaxRank) throw ParseError("dyadic rank out of range", key);
    }
    std::array<std::uint64_t, 4> words{};
    const std::string h = key.substr(colon + 1);
    if (h.size() > 64) throw ParseError("dyadic index too long", key);
    for (std::size_t i = 0; i < h.size(); ++i) {
      const char c = h[h.size() - 1 - i];
      std::uint64_t d = 0;
      if (c >= '0' && c <= '9') {
        d = static_cast<std::uint64_t>(c - '0');
      } else if (c >= 'a' && c <= 'f') {
        d = static_cast<std::uint64_t>(c - 'a' + 10);
      } else {
        throw ParseError("dyadic index is not lower-case hex", key);
      }
      words[i / 16] |= d << (4 * (i % 16));
    }
    const auto I = from_words(rank, words);
    if (I.key() != key) throw ParseError("dyadic index does not fit the rank", key);
    return I;
  }

  auto operator<=>(const DyadicInterval& o) const {
    if (auto c = rank_ <=> o.rank_; c != 0) return c;
    for (int w = 3; w >= 0; --w) {
      if (auto c = bits_[w] <=> o.bits_[w]; c != 0) return c;
    }
    return std::strong_ordering::equal;
  }
  bool operator==(const DyadicInterval& o) const = default;

  std::size_t hash() const noexcept {
    std::size_t h = std::hash<int>{}(rank_);
    for (auto b : bits_) h ^= std::hash<std::uint64_t>{}(b) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }

 private:
  using Words = std::array<std::uint64_t, 4>;

  static Words shl(const Words& a, int s) {
    Words r{0, 0, 0, 0};
    const int wsh = s / 64;
    const int bsh = s % 64;
    for (int i = 3; i >= 0; --i) {
      const int src = i - wsh;
      if (src < 0) continue;
      r[i] = a[src] << bsh;
      if (bsh && src - 1 >= 0) r[i] |= a[src - 1] >> (64 - bsh);
    }
    return r;
  }

  static Words shr(const Words& a, int s) {
    Words r{0, 0, 0, 0};
    const int wsh = s / 64;
    const int bsh = s % 64;
    for (int i = 0; i < 4; ++i) {
      const int src = i + wsh;
      if (src > 3) continue;
      r[i] = a[src] >> bsh;
      if (bsh && src + 1 <= 3) r[i] |= a[src + 1] << (64 - bsh);
    }
    return r;
  }

  /// Index < 2^rank.
  bool fits() const noexcept {
    for (int pos = rank_; pos < 256; ++pos) {
      if (pos % 64 == 0 && pos + 64 <= 256) {
        if (bits_[pos / 64] != 0) return false;
        pos += 63;
      } else if (bit(pos)) {
        return false;
      }
    }
    return true;
  }

  void decrement() {
    for (auto& w : bits_) {
      if (w-- != 0) break;
    }
  }

  int rank_ = 0;
  Words bits_{0, 0, 0, 0};
};

struct DyadicHash {
  std::size_t operator()(const DyadicInterval& I) const noexcept { return I.hash(); }
};

}  // namespace blil
