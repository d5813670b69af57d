#ifndef OPTEXEC_RNG_HPP
#define OPTEXEC_RNG_HPP

#include <array>
#include <cstdint>
#include <limits>
#include <boost/random/normal_distribution.hpp>
#include <random>

namespace optexec {

namespace detail {

constexpr std::uint32_t kMul0 = 0xD2511F53;
constexpr std::uint32_t kMul1 = 0xCD9E8D57;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

} // namespace detail

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int r = 0; r < 10; ++r) {
        const std::uint64_t p0 = std::uint64_t(detail::kMul0) * c0;
        const std::uint64_t p1 = std::uint64_t(detail::kMul1) * c2;
        const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
        const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
        c1 = static_cast<std::uint32_t>(p1);
        c3 = static_cast<std::uint32_t>(p0);
        c0 = n0;
        c2 = n2;
        k0 += detail::kWeyl0;
        k1 += detail::kWeyl1;
    }
    return {c0, c1, c2, c3};
}

/// Uniform random bit generator over one Philox substream. The key is the
/// run seed and the upper half of the counter is the stream id, so stream i
/// produces the same numbers no matter how many other streams run.
class PhiloxStream {
public:
    using result_type = std::uint64_t;

    PhiloxStream(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (used_ == 2) refill();
        const auto lo = buffer_[2 * used_], hi = buffer_[2 * used_ + 1];
        ++used_;
        return (std::uint64_t(hi) << 32) | lo;
    }

private:
    void refill() {
        buffer_ = philox4x32_10({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                 static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                                key_);
        ++block_;
        used_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 2;
};

/// Standard normal draws from a Philox substream.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) : engine_(seed, stream) {}
    double operator()() { return dist_(engine_); }

private:
    PhiloxStream engine_;
    boost::random::normal_distribution<double> dist_;
};

} // namespace optexec

#endif // OPTEXEC_RNG_HPP
