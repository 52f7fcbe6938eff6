#pragma once

#include "ssmgrad/statespace.hpp"

#include <vector>

namespace ssmgrad {

/// How the optimizer coordinates map to ARMA coefficients.
enum class ArmaParameterization {
    /// theta = (alpha, delta); a and b come from bounded PARCORs, so every real
    /// theta is stationary and invertible.
    transformed,
    /// theta = (a, b) directly.
    raw,
};

/// y_n = sum_j a_j y_{n-j} + v_n - sum_j b_j v_{n-j}, v_n ~ N(0, sigma^2),
/// with sigma^2 concentrated out of the likelihood.
struct ArmaSpec {
    int ar_order = 0;
    int ma_order = 0;
    double parcor_bound = 0.99;
    ArmaParameterization parameterization = ArmaParameterization::transformed;

    int state_dim() const { return ar_order > ma_order + 1 ? ar_order : ma_order + 1; }
    int param_dim() const { return ar_order + ma_order; }

    void validate() const;
};

struct ArmaCoefficients {
    Vector a;
    Vector b;
    double sigma2 = 1.0;
};

/// g_0..g_upto of the infinite moving-average representation.
Vector impulse_response(const Vector& a, const Vector& b, int upto);

/// Autocovariances C_0..C_upto. Throws SingularCovarianceSystem for non-stationary a.
Vector autocovariance(const Vector& a, const Vector& b, double sigma2, int upto);

/// Stationary covariance of the state vector of the ARMA state-space form.
Matrix initial_covariance(const Vector& a, const Vector& b, double sigma2);

struct InitialCovarianceDerivatives {
    std::vector<Matrix> da;  // d V0 / d a_p
    std::vector<Matrix> db;  // d V0 / d b_r
};

InitialCovarianceDerivatives initial_covariance_derivatives(const Vector& a, const Vector& b,
                                                            double sigma2);

/// Everything the stationary initial condition needs, computed together.
struct StationaryInit {
    Vector g;    // g_0..g_k
    Vector cov;  // C_0..C_k
    Matrix V0;
    std::vector<Matrix> dV0_da;
    std::vector<Matrix> dV0_db;
};

StationaryInit stationary_init(const Vector& a, const Vector& b, double sigma2,
                               bool with_derivatives);

/// Coefficients at theta plus the Jacobian d(a, b)/d(theta).
struct ArmaTransform {
    Vector a;
    Vector b;
    Matrix jacobian;
};

ArmaTransform transform_arma_params(const Vector& theta, const ArmaSpec& spec);

/// State-space form with F companion (first column a), G = (1, -b_1, ..., -b_{k-1})^T,
/// H = e_1, Q = sigma2, R = 0 and the stationary initial covariance.
/// Throws NonStationary for raw coefficients outside the stationary region.
StateSpaceModel build_arma(const ArmaSpec& spec, const Vector& theta,
                           DerivativeOrder order = DerivativeOrder::first, double sigma2 = 1.0);

class ArmaModel final : public ModelProvider {
public:
    explicit ArmaModel(ArmaSpec spec);

    const ArmaSpec& spec() const { return spec_; }
    ArmaCoefficients coefficients(const Vector& theta, double sigma2 = 1.0) const;

    int param_dim() const override { return spec_.param_dim(); }
    StateSpaceModel evaluate(const Vector& theta, DerivativeOrder order) const override {
        return build_arma(spec_, theta, order);
    }
    bool concentrated_variance() const override { return true; }
    std::string name() const override;
    std::vector<std::string> parameter_names() const override;
    StructuralParams structural(const Vector& theta) const override;

private:
    ArmaSpec spec_;
};

} // namespace ssmgrad
