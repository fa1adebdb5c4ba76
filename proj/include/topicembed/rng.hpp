#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace topicembed {

// Finalizer from the splitmix64 generator. Bijective on 64-bit words, used
// here to spread (seed, stream) pairs over the mt19937_64 seed space.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Domain tags keep the per-purpose streams of one run disjoint.
enum class StreamTag : std::uint64_t {
    Init = 1,
    Minibatch = 2,
    Doc = 3,
    Split = 4,
    Synthetic = 5,
    Eval = 6,
    Elbo = 7,
};

// Stream id for a (tag, a, b) triple.  Distinct triples give distinct ids
// with overwhelming probability; the mixing keeps nearby indices apart.
inline std::uint64_t stream_id(StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(tag));
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return h;
}

// Deterministic random stream addressed by (seed, stream id).  Two streams
// built from the same pair emit the same sequence; the whole run is therefore
// reproducible from the seed no matter how work is scheduled across threads.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : eng_(splitmix64(splitmix64(seed ^ 0x8f1bbcdcbfa53e0bULL) ^ stream)) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform double in [0, 1), 53 bits of randomness.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n), unbiased via rejection.  n must be > 0.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t u;
        do { u = next_u64(); } while (u >= limit);
        return u % n;
    }

    // Standard normal via Box-Muller; draws come in cached pairs.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double c = std::cos(6.283185307179586477 * u2);
        const double s = std::sin(6.283185307179586477 * u2);
        spare_ = r * s;
        have_spare_ = true;
        return r * c;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace topicembed
