#pragma once

#include "ssmgrad/kalman.hpp"
#include "ssmgrad/simulate.hpp"
#include "ssmgrad/statespace.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testing {

using ssmgrad::Matrix;
using ssmgrad::PairStack;
using ssmgrad::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

inline Vector random_vector(std::mt19937_64& rng, int n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

// M(theta) = M0 + sum_j theta_j M_j + 1/2 sum_jk theta_j theta_k M_jk.
struct PolyMatrix {
    Matrix c0;
    std::vector<Matrix> c1;
    PairStack<Matrix> c2;

    PolyMatrix() = default;
    PolyMatrix(std::mt19937_64& rng, int rows, int cols, int p, double s0, double s1, double s2,
               bool quadratic = true)
        : c0(random_matrix(rng, rows, cols, s0)),
          c2(static_cast<std::size_t>(p), Matrix::Zero(rows, cols)) {
        for (int j = 0; j < p; ++j) c1.push_back(random_matrix(rng, rows, cols, s1));
        if (quadratic)
            for (auto& m : c2) m = random_matrix(rng, rows, cols, s2);
    }

    Matrix value(const Vector& t) const {
        Matrix v = c0;
        const int p = static_cast<int>(c1.size());
        for (int j = 0; j < p; ++j) {
            v += t(j) * c1[static_cast<std::size_t>(j)];
            for (int k = 0; k < p; ++k) v += 0.5 * t(j) * t(k) * c2(j, k);
        }
        return v;
    }
    Matrix d(const Vector& t, int j) const {
        Matrix v = c1[static_cast<std::size_t>(j)];
        for (int k = 0; k < static_cast<int>(c1.size()); ++k) v += t(k) * c2(j, k);
        return v;
    }
    const Matrix& d2(int j, int k) const { return c2(j, k); }
};

// Every structure matrix and the initial condition depend on theta.
// Q = L L^T and V0 = S S^T + I stay PSD; R = exp(rho0 + c.theta) stays positive.
class PolyModel : public ssmgrad::ModelProvider {
public:
    PolyModel(std::uint64_t seed, int m = 3, int k = 2, int p = 2, bool dF = true, bool dG = true,
              bool dH = true)
        : m_(m), k_(k), p_(p) {
        std::mt19937_64 rng(seed);
        F_ = PolyMatrix(rng, m, m, p, 0.35, dF ? 0.15 : 0.0, dF ? 0.1 : 0.0, dF);
        G_ = PolyMatrix(rng, m, k, p, 1.0, dG ? 0.3 : 0.0, dG ? 0.2 : 0.0, dG);
        H_ = PolyMatrix(rng, 1, m, p, 1.0, dH ? 0.3 : 0.0, dH ? 0.2 : 0.0, dH);
        L_ = PolyMatrix(rng, k, k, p, 0.8, 0.3, 0.2);
        S_ = PolyMatrix(rng, m, m, p, 0.8, 0.3, 0.2);
        x0_ = PolyMatrix(rng, m, 1, p, 1.0, 0.5, 0.3);
        rho0_ = -0.5;
        rho_ = random_vector(rng, p, -0.6, 0.6);
    }

    int param_dim() const override { return p_; }
    bool has_second_derivatives() const override { return true; }
    std::string name() const override { return "poly"; }

    ssmgrad::StateSpaceModel evaluate(const Vector& t,
                                      ssmgrad::DerivativeOrder order) const override {
        using ssmgrad::DerivativeOrder;
        ssmgrad::StateSpaceModel model;
        model.dims = {m_, k_, p_};
        auto& mm = model.matrices;
        auto& ic = model.initial;
        if (order != DerivativeOrder::none) {
            mm = ssmgrad::ModelMatrices::zeros(model.dims);
            ic = ssmgrad::InitialCondition::zeros(model.dims);
        }
        const Matrix L = L_.value(t), S = S_.value(t);
        mm.F = F_.value(t);
        mm.G = G_.value(t);
        mm.H = H_.value(t);
        mm.Q = L * L.transpose();
        mm.R = std::exp(rho0_ + rho_.dot(t));
        ic.x0 = x0_.value(t);
        ic.V0 = S * S.transpose() + Matrix::Identity(m_, m_);
        if (order == DerivativeOrder::none) return model;

        for (int j = 0; j < p_; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            mm.dF[uj] = F_.d(t, j);
            mm.dG[uj] = G_.d(t, j);
            mm.dH[uj] = H_.d(t, j);
            const Matrix dL = L_.d(t, j), dS = S_.d(t, j);
            mm.dQ[uj] = dL * L.transpose() + L * dL.transpose();
            mm.dR[uj] = rho_(j) * mm.R;
            ic.dx0[uj] = x0_.d(t, j);
            ic.dV0[uj] = dS * S.transpose() + S * dS.transpose();
        }
        if (order == DerivativeOrder::first) return model;

        auto s = ssmgrad::StructureSecondDerivatives::zeros(model.dims);
        const auto up = static_cast<std::size_t>(p_);
        ic.d2x0 = PairStack<Vector>(up, Vector::Zero(m_));
        ic.d2V0 = PairStack<Matrix>(up, Matrix::Zero(m_, m_));
        for (int j = 0; j < p_; ++j) {
            for (int k = j; k < p_; ++k) {
                s.F(j, k) = F_.d2(j, k);
                s.G(j, k) = G_.d2(j, k);
                s.H(j, k) = H_.d2(j, k);
                const Matrix Ljk = L_.d2(j, k), Lj = L_.d(t, j), Lk = L_.d(t, k);
                s.Q(j, k) = Ljk * L.transpose() + Lj * Lk.transpose() + Lk * Lj.transpose() +
                            L * Ljk.transpose();
                s.R(j, k) = rho_(j) * rho_(k) * mm.R;
                (*ic.d2x0)(j, k) = x0_.d2(j, k);
                const Matrix Sjk = S_.d2(j, k), Sj = S_.d(t, j), Sk = S_.d(t, k);
                (*ic.d2V0)(j, k) = Sjk * S.transpose() + Sj * Sk.transpose() +
                                   Sk * Sj.transpose() + S * Sjk.transpose();
            }
        }
        mm.second = std::move(s);
        return model;
    }

private:
    int m_, k_, p_;
    PolyMatrix F_, G_, H_, L_, S_, x0_;
    double rho0_;
    Vector rho_;
};

inline std::vector<double> simulate_series(const ssmgrad::ModelProvider& provider,
                                           const Vector& theta, std::size_t n,
                                           std::uint64_t seed) {
    return ssmgrad::simulate(provider.evaluate(theta, ssmgrad::DerivativeOrder::none), n, seed).y;
}

// Central difference of a matrix-valued function along coordinate j.
inline Matrix fd_matrix(const std::function<Matrix(const Vector&)>& f, const Vector& t, int j,
                        double h) {
    Vector a = t, b = t;
    a(j) += h;
    b(j) -= h;
    return (f(a) - f(b)) / (2.0 * h);
}

// Fourth-order central difference of a matrix-valued function along coordinate j.
inline Matrix fd4_matrix(const std::function<Matrix(const Vector&)>& f, const Vector& t, int j,
                         double h) {
    auto at = [&](double s) {
        Vector u = t;
        u(j) += s * h;
        return f(u);
    };
    return (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12.0 * h);
}

// max |a - b| / max(max |a|, max |b|)
inline double max_rel(const Matrix& a, const Matrix& b) {
    const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
    if (scale == 0.0) return 0.0;
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace testing
