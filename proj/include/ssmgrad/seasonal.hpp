#pragma once

#include "ssmgrad/statespace.hpp"

namespace ssmgrad {

/// Trend (second-order difference) + seasonal (dummy sum) + optional AR component
/// plus observation noise.
///
/// State layout: [T_n, T_{n-1}, S_n, ..., S_{n-period+2}, p_n, ..., p_{n-ar_order+1}].
/// Parameter layout, all unconstrained:
///   ar_order == 0: (log tau1^2, log tau2^2, log sigma^2)
///   ar_order  > 0: (log tau1^2, log tau2^2, log tau3^2, log sigma^2, alpha_1..alpha_ar)
/// where the AR coefficients come from PARCORs beta_i = C (e^alpha - 1)/(e^alpha + 1).
struct SeasonalSpec {
    int period = 12;
    int ar_order = 0;
    double parcor_bound = 0.99;
    /// x0 = 0, V0 = diffuse_variance * I, independent of theta.
    double diffuse_variance = 1e4;

    int state_dim() const { return 2 + (period - 1) + ar_order; }
    int noise_dim() const { return ar_order > 0 ? 3 : 2; }
    int param_dim() const { return 3 + (ar_order > 0 ? 1 + ar_order : 0); }
    int sigma2_index() const { return ar_order > 0 ? 3 : 2; }
    int ar_offset() const { return 2 + (period - 1); }

    void validate() const;
};

/// Throws BadDimension when theta does not match the spec.
StateSpaceModel build_seasonal(const SeasonalSpec& spec, const Vector& theta,
                               DerivativeOrder order = DerivativeOrder::second);

/// Starting values used by the reference seasonal-adjustment fits.
Vector default_seasonal_theta(const SeasonalSpec& spec);

class SeasonalModel final : public ModelProvider {
public:
    explicit SeasonalModel(SeasonalSpec spec);

    const SeasonalSpec& spec() const { return spec_; }

    int param_dim() const override { return spec_.param_dim(); }
    StateSpaceModel evaluate(const Vector& theta, DerivativeOrder order) const override {
        return build_seasonal(spec_, theta, order);
    }
    bool has_second_derivatives() const override { return true; }
    std::string name() const override;
    std::vector<std::string> parameter_names() const override;
    StructuralParams structural(const Vector& theta) const override;

private:
    SeasonalSpec spec_;
};

} // namespace ssmgrad
