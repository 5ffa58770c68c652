#pragma once

#include <cmath>
#include <cstdint>

namespace evoell {

// Splittable counter-based random stream. Output i is a hash of
// (key, i), so a stream is a pure function of its key and runs are
// bit-reproducible from (seed, stream id). Child streams derive fresh
// keys from the parent key, so ensemble trajectories never share a
// counter sequence.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : key_(derive_key(mix(seed + kGamma), stream_id)) {}

    // Key identifying this stream (logged so disjointness can be audited).
    std::uint64_t key() const { return key_; }

    RngStream split(std::uint64_t child_id) const {
        RngStream s;
        s.key_ = derive_key(key_, child_id);
        return s;
    }

    std::uint64_t next_u64() { return mix(key_ + kGamma * ++counter_); }

    // Uniform in the open interval (0, 1).
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t uniform_below(std::uint64_t m) { return next_u64() % m; }

    // Standard normal via Box-Muller; the spare is cached within the stream.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform01();
        const double v = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 2.0 * M_PI * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    RngStream() = default;

    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

    // SplitMix64 finalizer.
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive_key(std::uint64_t parent, std::uint64_t id) {
        return mix(parent ^ mix(id + 0x6a09e667f3bcc909ULL));
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace evoell
