#pragma once

#include "ssmgrad/statespace.hpp"

#include <cstdint>
#include <vector>

namespace ssmgrad {

struct SimulationResult {
    std::vector<double> y;
    std::vector<Vector> states;  // x_1..x_n
};

/// Draws x_0 ~ N(x0, V0) and iterates the transition and observation equations
/// with Gaussian noise from a generator seeded by `seed`. Deterministic per seed.
SimulationResult simulate(const StateSpaceModel& model, std::size_t n, std::uint64_t seed);

} // namespace ssmgrad
