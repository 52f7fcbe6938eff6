#pragma once

#include "ssmgrad/statespace.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ssmgrad {

enum class GradientSource {
    automatic,  // analytic when the provider fills first-derivative stacks
    analytic,
    finite_difference,
};

struct OptimizerConfig {
    int max_iter = 200;
    double grad_tol = 1e-6;   // max-norm of the gradient
    double step_tol = 1e-10;  // relative max-norm of an accepted step
    double c1 = 1e-4;         // sufficient increase
    double c2 = 0.9;          // curvature
    double fd_constant = 1e-3;
    double max_step = 1.0;    // max-norm cap on the first trial step of each line search
    int max_line_search = 40;
    GradientSource gradient = GradientSource::automatic;

    /// Throws BadDimension for out-of-range settings.
    void validate() const;
};

struct IterationRecord {
    int iter = 0;
    double loglik = 0.0;
    long double loglik_extended = 0.0L;
    double grad_norm = 0.0;
    double step_length = 0.0;
    int line_search_evals = 0;
};

struct EvaluationCounts {
    std::uint64_t value_evals = 0;
    std::uint64_t gradient_evals = 0;
    std::uint64_t filter_passes = 0;
};

struct OptimizeResult {
    Vector theta_hat;
    double loglik = 0.0;
    Vector gradient;
    int n_iter = 0;
    bool converged = false;
    bool line_search_failed = false;
    double aic = 0.0;
    std::string message;
    /// Entry 0 is the starting point.
    std::vector<IterationRecord> log;
    EvaluationCounts counts;
};

/// f(theta) -> loglik.
using ValueFunction = std::function<double(const Vector&)>;
/// f(theta, grad) -> loglik, writing the gradient into grad.
using ValueGradientFunction = std::function<double(const Vector&, Vector&)>;

/// Central differences with step C * max(|theta_j|, 1).
/// Throws ProbeFailure when f throws or returns a non-finite value at a probe.
Vector fd_gradient(const ValueFunction& f, const Vector& theta, double C = 1e-3);

/// Log-likelihood of a provider as an optimizer objective, with evaluation counts.
class LikelihoodObjective {
public:
    LikelihoodObjective(const ModelProvider& provider, std::span<const double> y,
                        GradientSource source = GradientSource::automatic,
                        double fd_constant = 1e-3);

    /// One filter pass.
    double value(const Vector& theta) const;
    /// One pass for the analytic gradient; 1 + 2p passes on the finite-difference path.
    double value_and_gradient(const Vector& theta, Vector& grad) const;
    /// Same evaluation, returning loglik before the final rounding to double.
    long double value_and_gradient_extended(const Vector& theta, Vector& grad) const;

    GradientSource source() const { return source_; }
    const ModelProvider& provider() const { return provider_; }
    const EvaluationCounts& counts() const { return counts_; }

private:
    const ModelProvider& provider_;
    std::vector<double> y_;
    GradientSource source_;
    double fd_constant_;
    mutable EvaluationCounts counts_;
};

Vector fd_gradient(const ModelProvider& provider, const Vector& theta, std::span<const double> y,
                   double C = 1e-3);

/// BFGS ascent with a strong-Wolfe line search. Accepted iterates strictly
/// increase f. On failure the best point so far is returned with converged = false.
/// aic is -2 loglik + 2 p.
OptimizeResult bfgs_maximize(const ValueGradientFunction& f, const Vector& theta0,
                             const OptimizerConfig& cfg = {});

/// As above on the provider's log-likelihood; aic counts a concentrated variance.
/// Throws EvaluationFailure when the likelihood cannot be evaluated at theta0.
OptimizeResult bfgs_maximize(const ModelProvider& provider, const Vector& theta0,
                             std::span<const double> y, const OptimizerConfig& cfg = {});

double aic(double loglik, int param_dim, bool concentrated_variance);

/// |a - b| / max(|a|, |b|), zero when both are zero.
double relative_difference(double a, double b);
/// -log10 of the relative difference, clipped to [0, 17].
double agreement_digits(double a, double b);

struct GradientCheckRow {
    std::string name;
    double analytic = 0.0;
    double numerical = 0.0;
    double abs_diff = 0.0;
    double rel_diff = 0.0;
    double digits = 0.0;
    bool flagged = false;
};

struct GradientCheck {
    double loglik = 0.0;
    double fd_constant = 0.0;
    std::vector<GradientCheckRow> rows;
};

/// Analytic gradient against central differences; rows with fewer than
/// flag_digits agreement digits are flagged.
GradientCheck check_gradient(const ModelProvider& provider, const Vector& theta,
                             std::span<const double> y, double C = 1e-3,
                             double flag_digits = 4.0);

} // namespace ssmgrad
