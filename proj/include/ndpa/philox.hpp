#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Each
// (counter, key) pair maps to four independent 32-bit words, so a stream
// can be addressed directly by (step, trajectory) without shared state.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace ndpa {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

[[nodiscard]] inline PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
    constexpr std::uint64_t m0 = 0xD2511F53u;
    constexpr std::uint64_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += w0;
            key[1] += w1;
        }
        const std::uint64_t p0 = m0 * ctr[0];
        const std::uint64_t p1 = m1 * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
}

/// Standard normals addressed by (seed, trajectory, step, group). Four
/// normals per call via Box-Muller on 32-bit uniforms in (0, 1).
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    [[nodiscard]] std::array<double, 4> draw(std::uint64_t step, std::uint32_t traj, std::uint32_t group) const {
        const PhiloxCounter r = bits(step, traj, group);
        std::array<double, 4> out;
        box_muller(r[0], r[1], out[0], out[1]);
        box_muller(r[2], r[3], out[2], out[3]);
        return out;
    }

    /// First two normals of draw(), without computing the other pair.
    [[nodiscard]] std::array<double, 2> draw2(std::uint64_t step, std::uint32_t traj, std::uint32_t group) const {
        const PhiloxCounter r = bits(step, traj, group);
        std::array<double, 2> out;
        box_muller(r[0], r[1], out[0], out[1]);
        return out;
    }

private:
    [[nodiscard]] PhiloxCounter bits(std::uint64_t step, std::uint32_t traj, std::uint32_t group) const {
        return philox4x32_10({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), traj, group},
                             key_);
    }

    static void box_muller(std::uint32_t a, std::uint32_t b, double& n0, double& n1) {
        constexpr double scale = 1.0 / 4294967296.0;
        const double rad = std::sqrt(-2.0 * std::log((static_cast<double>(a) + 0.5) * scale));
        const double ang = 2.0 * std::numbers::pi * ((static_cast<double>(b) + 0.5) * scale);
        n0 = rad * std::cos(ang);
        n1 = rad * std::sin(ang);
    }

    PhiloxKey key_;
};

}  // namespace ndpa
