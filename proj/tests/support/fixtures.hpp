#pragma once

#include "fdgd/harness.hpp"
#include "fdgd/plant.hpp"

#include <cstdint>

namespace fixture {

using fdgd::Matrix;
using fdgd::Vector;

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

inline fdgd::NetworkedPlant scalar_plant(double a, double b, double c, double d, double e) {
    return fdgd::NetworkedPlant({scalar(a), scalar(b), scalar(c), scalar(d), scalar(e)},
                                fdgd::Partition({1}), fdgd::Partition({1}), fdgd::Partition({1}));
}

// Benchmark-class config with small N for quick tests.
inline fdgd::ExperimentConfig small_config(std::uint64_t seed, std::size_t N = 5) {
    fdgd::ExperimentConfig c;
    c.seed = seed;
    c.N = N;
    c.steps = 200;
    c.csv_stride = 1;
    c.etas = {1e-5, 1e-6};
    c.plots = false;
    return c;
}

inline fdgd::Problem small_problem(std::uint64_t seed, std::size_t N = 5) {
    return fdgd::make_problem(fdgd::generate_benchmark(small_config(seed, N)));
}

}  // namespace fixture
