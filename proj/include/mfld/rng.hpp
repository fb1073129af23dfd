#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <boost/random/normal_distribution.hpp>

namespace mfld {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
// Every draw is a pure function of (key, counter), which is what makes the
// per-path and per-particle substreams independent of evaluation order.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) {
    std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3], k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c0;
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c2;
      const auto n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
      const auto n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
      c1 = static_cast<std::uint32_t>(p1);
      c3 = static_cast<std::uint32_t>(p0);
      c0 = n0;
      c2 = n2;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return {c0, c1, c2, c3};
  }

  // L blocks with consecutive first counter words from `ctr`, round by round
  // so that the independent multiply chains overlap (and vectorise). Block l
  // equals generate({ctr[0] + l, ctr[1], ctr[2], ctr[3]}, key) and lands in
  // out[4 l .. 4 l + 3].
  template <int L>
  static void generate_run(Counter ctr, Key key, std::uint32_t* out) {
    std::uint32_t c0[L], c1[L], c2[L], c3[L];
    for (int l = 0; l < L; ++l) {
      c0[l] = ctr[0] + static_cast<std::uint32_t>(l);
      c1[l] = ctr[1], c2[l] = ctr[2], c3[l] = ctr[3];
    }
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
      for (int l = 0; l < L; ++l) {
        const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c0[l];
        const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c2[l];
        const auto n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1[l] ^ k0;
        const auto n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3[l] ^ k1;
        c1[l] = static_cast<std::uint32_t>(p1);
        c3[l] = static_cast<std::uint32_t>(p0);
        c0[l] = n0;
        c2[l] = n2;
      }
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    for (int l = 0; l < L; ++l) {
      out[4 * l] = c0[l];
      out[4 * l + 1] = c1[l];
      out[4 * l + 2] = c2[l];
      out[4 * l + 3] = c3[l];
    }
  }
};

// Stream tags keep the different consumers of one master seed disjoint.
enum class Stream : std::uint32_t {
  brownian = 1,
  init = 2,
  inner = 3,
  projection = 4,
  resample = 5,
  experiment = 6,
  test = 99,
};

// A keyed view over Philox: draws are addressed by four 32-bit counter words.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Stream stream)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32) ^
                 (static_cast<std::uint32_t>(stream) * 0x85EBCA6Bu)} {}

  Philox4x32::Counter bits(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                           std::uint32_t c3) const {
    return Philox4x32::generate({c0, c1, c2, c3}, key_);
  }

  // Four uniforms in the open interval (0, 1).
  std::array<double, 4> uniform4(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                                 std::uint32_t c3) const {
    const auto b = bits(c0, c1, c2, c3);
    return {to_unit(b[0]), to_unit(b[1]), to_unit(b[2]), to_unit(b[3])};
  }

  // Four standard normals via two Box-Muller pairs.
  std::array<double, 4> normal4(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                                std::uint32_t c3) const {
    const auto u = uniform4(c0, c1, c2, c3);
    std::array<double, 4> z{};
    for (int pair = 0; pair < 2; ++pair) {
      const double r = std::sqrt(-2.0 * std::log(u[2 * pair]));
      const double angle = 2.0 * std::numbers::pi * u[2 * pair + 1];
      z[2 * pair] = r * std::cos(angle);
      z[2 * pair + 1] = r * std::sin(angle);
    }
    return z;
  }

  // Sequential 64-bit words of the substream (c1, c2, c3), block index in
  // c0. Satisfies the uniform random bit generator requirements.
  class WordStream {
   public:
    using result_type = std::uint64_t;
    WordStream(const CounterRng& rng, std::uint32_t c1, std::uint32_t c2, std::uint32_t c3)
        : key_(rng.key_), c1_(c1), c2_(c2), c3_(c3) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() {
      if (used_ == kWords) refill();
      const std::uint32_t* w = buf_.data() + 2 * used_++;
      return (std::uint64_t{w[0]} << 32) | w[1];
    }

   private:
    static constexpr int kBlocks = 16, kWords = 2 * kBlocks;
    void refill() {
      Philox4x32::generate_run<kBlocks>({block_, c1_, c2_, c3_}, key_, buf_.data());
      block_ += kBlocks;
      used_ = 0;
    }
    Philox4x32::Key key_;
    std::uint32_t c1_, c2_, c3_;
    std::uint32_t block_ = 0;
    int used_ = kWords;
    std::array<std::uint32_t, 4 * kBlocks> buf_{};
  };

  // Fills `count` standard normals from the substream (c1, c2, c3) with the
  // ziggurat sampler. A shorter fill is a prefix of a longer one.
  template <class Out>
  void fill_normals(Out&& out, std::size_t count, std::uint32_t c1, std::uint32_t c2,
                    std::uint32_t c3) const {
    WordStream words(*this, c1, c2, c3);
    boost::random::normal_distribution<double> normal;
    for (std::size_t i = 0; i < count; ++i) out[i] = normal(words);
  }

 private:
  static double to_unit(std::uint32_t v) { return (static_cast<double>(v) + 0.5) * 0x1p-32; }

  Philox4x32::Key key_;
};

}  // namespace mfld
