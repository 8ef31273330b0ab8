#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace bvfilter {

/// Philox4x32-10 counter-based bit generator (Salmon et al., SC'11).
///
/// The key is derived from (seed, stream) and the 128-bit counter advances by
/// one block per four 32-bit outputs. Identical (seed, stream) pairs always
/// produce identical sequences; distinct streams are statistically independent.
class Philox4x32 {
public:
    using result_type = std::uint32_t;

    Philox4x32() : Philox4x32(0, 0) {}
    Philox4x32(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (index_ == 4) {
            block_ = generate(counter_, key_);
            increment();
            index_ = 0;
        }
        return block_[index_++];
    }

    /// Block function; exposed for known-answer tests.
    static std::array<std::uint32_t, 4> generate(std::array<std::uint32_t, 4> ctr,
                                                 std::array<std::uint32_t, 2> key) {
        constexpr std::uint32_t kMul0 = 0xD2511F53u;
        constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
        constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
        constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

private:
    void increment() {
        if (++counter_[0] == 0) ++counter_[1];
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int index_ = 4;
};

/// SplitMix64 finalizer, used to derive child stream ids.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// A reproducible random stream identified by (seed, stream id).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), engine_(seed, stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Independent child stream; depends only on (seed, stream, child).
    RngStream substream(std::uint64_t child) const {
        return RngStream(seed_, mix64(stream_ ^ mix64(child + 0x632BE59BD9B4E019ull)));
    }

    /// Standard normal by the Marsaglia polar method on 32-bit coordinates; the
    /// second variate of each accepted pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, r;
        do {
            u = (static_cast<double>(engine_()) + 0.5) * 0x1.0p-31 - 1.0;
            v = (static_cast<double>(engine_()) + 0.5) * 0x1.0p-31 - 1.0;
            r = u * u + v * v;
        } while (r >= 1.0);
        const double scale = std::sqrt(-2.0 * std::log(r) / r);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }
    std::uint64_t bits() {
        const std::uint64_t lo = engine_();
        return (std::uint64_t{engine_()} << 32) | lo;
    }

    Philox4x32& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    Philox4x32 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace bvfilter
