#pragma once

#include "ssmgrad/statespace.hpp"

#include <vector>

namespace ssmgrad {

/// AR coefficients of x_n = sum_i a_i x_{n-i} + v_n from partial autocorrelations,
/// via a_j^(m) = a_j^(m-1) - beta_m a_{m-j}^(m-1), a_m^(m) = beta_m.
Vector parcor_to_ar(const Vector& beta);

/// Jacobian J(i, k) = d a_i / d beta_k of parcor_to_ar.
Matrix parcor_jacobian(const Vector& beta);

/// Second partials: entry [i](k, l) = d^2 a_i / d beta_k d beta_l.
std::vector<Matrix> parcor_hessian(const Vector& beta);

/// Inverse of parcor_to_ar (step-down recursion). Throws NonStationary when
/// some partial autocorrelation has magnitude >= 1.
Vector ar_to_parcor(const Vector& a);

/// beta = C (e^t - 1)/(e^t + 1) with its first and second derivatives in t.
struct BoundedParcor {
    double beta = 0.0;
    double dbeta = 0.0;
    double d2beta = 0.0;
};

BoundedParcor unconstrained_to_parcor(double theta, double bound);

/// Coefficients reached from unconstrained coordinates through bounded PARCORs.
struct ParcorChain {
    Vector beta;
    Vector coefficients;
    Matrix jacobian;                 // d coefficient_i / d theta_j
    std::vector<Matrix> hessian;     // [i](j, l); filled only on request
};

ParcorChain parcor_chain(const Vector& theta, double bound, bool with_hessian = false);

/// Largest eigenvalue modulus of the companion matrix of x_n = sum a_i x_{n-i}.
/// Below one means stationary (or invertible, for MA coefficients).
double companion_spectral_radius(const Vector& a);

} // namespace ssmgrad
