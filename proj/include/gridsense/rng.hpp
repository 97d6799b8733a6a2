#pragma once
#include <array>
#include <cmath>
#include <cstdint>

namespace gridsense {

// Philox4x32-10 counter-based generator. Chosen over std engines because
// every (seed, stream) pair must yield the same sequence on every platform,
// and independent streams (one per machine, one per measurement channel)
// must be creatable without coordination. Reference constants from the
// Salmon et al. SC'11 parameterization.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : k0_(static_cast<std::uint32_t>(seed)),
          k1_(static_cast<std::uint32_t>(seed >> 32)),
          s0_(static_cast<std::uint32_t>(stream)),
          s1_(static_cast<std::uint32_t>(stream >> 32)) {}

    std::array<std::uint32_t, 4> block(std::uint64_t counter) const {
        std::uint32_t c0 = static_cast<std::uint32_t>(counter);
        std::uint32_t c1 = static_cast<std::uint32_t>(counter >> 32);
        std::uint32_t c2 = s0_, c3 = s1_;
        std::uint32_t k0 = k0_, k1 = k1_;
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = std::uint64_t(0xD2511F53u) * c0;
            std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * c2;
            std::uint32_t h0 = static_cast<std::uint32_t>(p0 >> 32);
            std::uint32_t l0 = static_cast<std::uint32_t>(p0);
            std::uint32_t h1 = static_cast<std::uint32_t>(p1 >> 32);
            std::uint32_t l1 = static_cast<std::uint32_t>(p1);
            std::uint32_t n0 = h1 ^ c1 ^ k0;
            std::uint32_t n1 = l1;
            std::uint32_t n2 = h0 ^ c3 ^ k1;
            std::uint32_t n3 = l0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += 0x9E3779B9u; // golden ratio increments per round
            k1 += 0xBB67AE85u;
        }
        return {c0, c1, c2, c3};
    }

private:
    std::uint32_t k0_, k1_, s0_, s1_;
};

// Sequential standard normals from one Philox stream via Box-Muller.
// One counter block yields two uniforms and therefore two normals.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream)
        : gen_(seed, stream) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        auto b = gen_.block(counter_++);
        // (x + 0.5) / 2^32 keeps u strictly inside (0,1)
        double u1 = (static_cast<double>(b[0]) + 0.5) * 0x1p-32;
        double u2 = (static_cast<double>(b[1]) + 0.5) * 0x1p-32;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    Philox gen_;
    std::uint64_t counter_ = 0;
    double spare_ = 0;
    bool have_spare_ = false;
};

} // namespace gridsense
