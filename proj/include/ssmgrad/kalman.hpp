#pragma once

#include "ssmgrad/statespace.hpp"
#include "ssmgrad/summation.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ssmgrad {

/// Filter moments x_{n|n}, V_{n|n} (or x_{n|n-1}, V_{n|n-1} after predict).
struct FilterState {
    Vector x;
    Matrix V;
};

/// One-step-ahead prediction error, its variance and the Kalman gain.
struct InnovationRecord {
    double eps = 0.0;
    double r = 0.0;
    Vector gain;
};

/// Per-parameter derivatives of an InnovationRecord.
struct GradInnovation {
    Vector deps;
    Vector dr;
    std::vector<Vector> dgain;
};

enum class HessianSource { none, analytic, finite_difference };

struct LikelihoodReport {
    double loglik = 0.0;
    /// loglik before the final rounding to double.
    long double loglik_extended = 0.0L;
    std::size_t n_obs = 0;
    std::vector<InnovationRecord> innovations;
    std::vector<GradInnovation> grad_innovations;
    std::optional<Vector> gradient;
    std::optional<Matrix> hessian;
    HessianSource hessian_source = HessianSource::none;
    /// Profiled innovation variance; set only for concentrated models.
    std::optional<double> sigma2_hat;
};

/// Innovation variances at or below this value abort the filter.
inline constexpr double kMinInnovationVariance = 1e-300;

/// x <- F x, V <- F V F^T + G Q G^T, symmetrized.
FilterState predict(const FilterState& state, const ModelMatrices& mm);

struct UpdateResult {
    FilterState state;
    InnovationRecord innovation;
};

/// Measurement update with the plain (I - K H) V covariance form.
/// Throws NonpositiveInnovationVariance (carrying `step`) when r <= 1e-300.
UpdateResult update(const FilterState& predicted, const ModelMatrices& mm, double y,
                    std::size_t step = 0);

/// Gaussian log-likelihood by the prediction-error decomposition.
/// Concentrated providers get the profiled form with sigma2_hat filled in.
LikelihoodReport run_filter(const StateSpaceModel& model, std::span<const double> y,
                            bool concentrated = false);
LikelihoodReport run_filter(const ModelProvider& provider, const Vector& theta,
                            std::span<const double> y);

struct ConcentratedLikelihood {
    double sigma2_hat = 0.0;
    double loglik = 0.0;
};

/// sigma2_hat = (1/N) sum eps^2/r and the log-likelihood with sigma^2 profiled out.
/// Throws DegenerateVariance if sigma2_hat is not positive and finite.
ConcentratedLikelihood concentrated_loglik(std::span<const InnovationRecord> innovations);

/// Number of complete filter passes (any order) started on the calling thread.
std::uint64_t filter_passes_on_this_thread();

namespace detail {

// Shared by every filter so their likelihood values agree bit-for-bit.
FilterState predict(const FilterState& state, const Matrix& F, const Matrix& GQGt);

class LikelihoodAccumulator {
public:
    void add(const InnovationRecord& rec);
    std::size_t count() const { return n_; }
    double sum_log_r() const { return log_r_.value(); }
    double sum_weighted_sq() const { return e2_over_r_.value(); }
    /// Fills loglik (and sigma2_hat when concentrated) into the report.
    void finish(LikelihoodReport& report, bool concentrated) const;

private:
    std::size_t n_ = 0;
    CompensatedSum log_r_;
    CompensatedSum e2_over_r_;
};

void count_filter_pass();
void check_series(std::span<const double> y);

} // namespace detail

} // namespace ssmgrad
