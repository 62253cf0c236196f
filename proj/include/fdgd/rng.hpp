#pragma once

#include <cstdint>
#include <random>

namespace fdgd::rng {

// splitmix64 finalizer; used to derive independent substream seeds.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Named substreams of one experiment seed. Each matrix draws from its own
// stream, so adding a draw to one never shifts another.
enum class StreamId : std::uint64_t {
    circulant_row = 1,
    input_matrix = 2,
    output_matrix = 3,
    disturbance_matrix = 4,
    disturbance = 5,
    alpha = 6,
    graph = 7,
    probe = 8,
};

// mt19937_64 seeded with splitmix64(seed + index). Uniforms use the top 53
// bits; normals come from Box-Muller, so the bit pattern of normal draws also
// depends on the platform's log/sin/cos (glibc here).
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t index);
    Stream(std::uint64_t seed, StreamId id) : Stream(seed, static_cast<std::uint64_t>(id)) {}

    [[nodiscard]] std::uint64_t next() { return engine_(); }
    // [0, 1)
    [[nodiscard]] double uniform();
    [[nodiscard]] double uniform(double low, double high) { return low + (high - low) * uniform(); }
    [[nodiscard]] double normal();
    // Integer in [0, bound).
    [[nodiscard]] std::uint64_t below(std::uint64_t bound);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace fdgd::rng
