#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace sdpuf {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stream tags keep independent consumers of one master seed apart.
enum class StreamTag : std::uint64_t {
    Population = 0x706f70,
    Startup = 0x737570,
    Synthetic = 0x73796e,
};

/// Counter-based generator: the i-th output is a pure function of (key, i).
///
/// The key is derived by hashing the master seed together with a list of
/// stream coordinates (cell index, trial index, ...), so the numbers a cell
/// consumes never depend on which worker ran it or in what order.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

    CounterRng(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> coords) noexcept
        : key_(derive_key(seed, tag, coords)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
    }

    std::uint64_t counter() const noexcept { return counter_; }

    static std::uint64_t derive_key(std::uint64_t seed, StreamTag tag,
                                    std::initializer_list<std::uint64_t> coords) noexcept
    {
        std::uint64_t k = mix64(seed ^ 0x5d4c3b2a19081726ULL);
        k = mix64(k ^ static_cast<std::uint64_t>(tag));
        for (std::uint64_t c : coords)
            k = mix64(k + 0x9e3779b97f4a7c15ULL + c);
        return k;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace sdpuf
