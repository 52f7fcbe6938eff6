#include "ssmgrad/simulate.hpp"

#include "ssmgrad/errors.hpp"

#include <cmath>
#include <random>

namespace ssmgrad {

SimulationResult simulate(const StateSpaceModel& model, std::size_t n, std::uint64_t seed) {
    const auto& mm = model.matrices;
    const auto& ic = model.initial;
    if (mm.R < 0.0) throw BadDimension("observation variance must be nonnegative");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    auto draw = [&](Eigen::Index k) {
        Vector z(k);
        for (Eigen::Index i = 0; i < k; ++i) z(i) = normal(rng);
        return z;
    };

    const Matrix v0_root = psd_sqrt(ic.V0);
    const Matrix q_root = psd_sqrt(mm.Q);
    const double r_root = std::sqrt(mm.R);

    SimulationResult out;
    out.y.reserve(n);
    out.states.reserve(n);
    Vector x = ic.x0 + v0_root * draw(ic.V0.rows());
    for (std::size_t t = 0; t < n; ++t) {
        x = mm.F * x + mm.G * (q_root * draw(mm.Q.rows()));
        out.y.push_back(mm.H.dot(x) + r_root * normal(rng));
        out.states.push_back(x);
    }
    return out;
}

} // namespace ssmgrad
