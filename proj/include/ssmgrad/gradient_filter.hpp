#pragma once

#include "ssmgrad/kalman.hpp"

#include <span>
#include <vector>

namespace ssmgrad {

/// Filter moments plus their partial derivatives with respect to each theta_j.
struct GradFilterState {
    FilterState base;
    std::vector<Vector> dx;
    std::vector<Matrix> dV;

    static GradFilterState from_initial(const InitialCondition& ic);
};

/// Prediction step for the moments and their derivatives. The dF terms use the
/// pre-prediction x_{n-1|n-1}, V_{n-1|n-1}.
GradFilterState grad_predict(const GradFilterState& gs, const ModelMatrices& mm);

struct GradUpdateResult {
    GradFilterState state;
    InnovationRecord innovation;
    GradInnovation grad;
};

GradUpdateResult grad_update(const GradFilterState& predicted, const ModelMatrices& mm, double y,
                             std::size_t step = 0);

/// Log-likelihood and its exact gradient from a single filtering pass.
LikelihoodReport run_gradient_filter(const StateSpaceModel& model, std::span<const double> y,
                                     bool concentrated = false);
LikelihoodReport run_gradient_filter(const ModelProvider& provider, const Vector& theta,
                                     std::span<const double> y);

/// Score of the Gaussian log-likelihood from recorded innovations and their derivatives.
Vector gradient_from_innovations(std::span<const InnovationRecord> innovations,
                                 std::span<const GradInnovation> grads);

/// Score of the profiled log-likelihood, with sigma^2 held at sigma2_hat.
Vector concentrated_gradient(std::span<const InnovationRecord> innovations,
                             std::span<const GradInnovation> grads, double sigma2_hat);

namespace detail {

// Everything the derivative prediction needs that is constant over a run.
struct GradientStructure {
    Matrix GQGt;
    std::vector<Matrix> dNoise;  // d(G Q G^T)/d theta_j
    std::vector<bool> has_dF;
    std::vector<bool> has_dH;

    explicit GradientStructure(const ModelMatrices& mm);
};

GradFilterState grad_predict(const GradFilterState& gs, const ModelMatrices& mm,
                             const GradientStructure& gsx);

} // namespace detail

} // namespace ssmgrad
