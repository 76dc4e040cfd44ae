#pragma once

#include <cstdint>
#include <string_view>

namespace modjoint {

// Deterministic, platform-independent random source. All randomness in a
// run flows from one master seed through named substreams so components
// can be re-seeded independently in tests.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) { seed_state(seed); }

    // Substream: stable hash of (seed, name, index).
    Rng(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0) {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
        for (char c : stream) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        h ^= index + 0x9e3779b97f4a7c15ULL;
        seed_state(splitmix(h));
    }

    std::uint64_t next_u64() {
        // xoshiro256**
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // modulo with rejection to stay unbiased
        if (n == 0) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Counter-based uniform tied to an id: independent of draw order.
    static double unit_for(std::uint64_t stream_seed, std::uint64_t id) {
        return static_cast<double>(splitmix(stream_seed ^ (id * 0x9e3779b97f4a7c15ULL + 0x2545F4914F6CDD1DULL)) >> 11) * 0x1.0p-53;
    }

    static std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream) {
        Rng r(seed, stream);
        return r.next_u64();
    }

   private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    void seed_state(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : s_) {
            x = splitmix(x);
            s = x;
        }
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t s_[4];
};

}  // namespace modjoint
