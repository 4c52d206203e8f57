#pragma once

#include <array>
#include <cstdint>

namespace bpinpaint {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

/// Combines words into one 64-bit key; order-sensitive.
std::uint64_t mix_key(std::uint64_t a, std::uint64_t b);

/// Counter-based stream: the sequence depends only on (key, a, b), never on
/// which thread draws it or in which order streams are visited. Each stream can
/// produce 2^32 blocks of 128 bits.
class CounterStream {
public:
    CounterStream(std::uint64_t key, std::uint32_t a, std::uint32_t b);

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    /// Gamma(shape, rate); shape > 0, rate > 0.
    double gamma(double shape, double rate);
    double beta(double a, double b);
    bool bernoulli_logit(double log_odds);

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint32_t a_;
    std::uint32_t b_;
    std::uint32_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int used_ = 4;  // 32-bit words consumed from buf_
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Random variable classes used to separate Gibbs streams.
enum class StreamClass : std::uint32_t {
    init_atom = 1,
    atom = 2,
    indicator = 3,
    weight = 4,
    usage = 5,
    weight_precision = 6,
    noise_precision = 7,
    mask = 16,
};

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t epoch, StreamClass cls) {
    return mix_key(mix_key(seed, epoch), static_cast<std::uint64_t>(cls));
}

}  // namespace bpinpaint
