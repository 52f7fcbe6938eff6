#pragma once

#include "ssmgrad/gradient_filter.hpp"

#include <span>

namespace ssmgrad {

/// Gradient-filter state extended with second partials over parameter pairs.
struct HessFilterState {
    GradFilterState grad;
    PairStack<Vector> d2x;
    PairStack<Matrix> d2V;

    /// Requires d2x0/d2V0 when present; missing ones start at zero.
    static HessFilterState from_initial(const InitialCondition& ic);
};

/// Second partials of eps_n, r_n and K_n for one step.
struct HessInnovation {
    PairStack<double> d2eps;
    PairStack<double> d2r;
    PairStack<Vector> d2gain;
};

struct HessStepResult {
    HessFilterState state;
    InnovationRecord innovation;
    GradInnovation grad;
    HessInnovation hess;
};

/// Prediction for all moments up to second order. Throws MissingSecondDerivatives.
HessFilterState hess_predict(const HessFilterState& hs, const ModelMatrices& mm);

/// Measurement update for all moments up to second order.
HessStepResult hess_update(const HessFilterState& predicted, const ModelMatrices& mm, double y,
                           std::size_t step = 0);

/// One full filter step (predict then update) from x_{n-1|n-1} to x_{n|n}.
HessStepResult hess_step(const HessFilterState& filtered, const ModelMatrices& mm, double y,
                         std::size_t step = 0);

/// Per-step contribution sums assembled into the Hessian of the Gaussian log-likelihood.
Matrix hessian_from_innovations(std::span<const InnovationRecord> innovations,
                                std::span<const GradInnovation> grads,
                                std::span<const HessInnovation> hess);

/// Hessian of the profiled (sigma^2 concentrated out) log-likelihood.
Matrix concentrated_hessian(std::span<const InnovationRecord> innovations,
                            std::span<const GradInnovation> grads,
                            std::span<const HessInnovation> hess);

/// Log-likelihood, gradient and analytic Hessian in one pass.
LikelihoodReport run_hessian_filter(const StateSpaceModel& model, std::span<const double> y,
                                    bool concentrated = false);

enum class HessianMethod {
    automatic,          // analytic when the provider has second derivatives, else finite differences
    analytic,
    finite_difference,  // central differences of the analytic gradient
};

inline constexpr double kHessianFdConstant = 1e-4;

LikelihoodReport run_hessian_filter(const ModelProvider& provider, const Vector& theta,
                                    std::span<const double> y,
                                    HessianMethod method = HessianMethod::automatic);

/// Central differences of run_gradient_filter with step fd_constant * max(|theta_j|, 1);
/// the report carries the gradient at theta and the symmetrized Hessian.
LikelihoodReport fd_hessian(const ModelProvider& provider, const Vector& theta,
                            std::span<const double> y, double fd_constant = kHessianFdConstant);

} // namespace ssmgrad
