#include "ssmgrad/parcor.hpp"

#include "ssmgrad/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace ssmgrad {

namespace {

using Index = Eigen::Index;

// One Levinson sweep carrying coefficients and, optionally, their derivatives.
struct LevinsonSweep {
    Vector a;
    Matrix jac;
    std::vector<Matrix> hess;

    LevinsonSweep(const Vector& beta, bool want_jac, bool want_hess) {
        const Index order = beta.size();
        a = Vector::Zero(order);
        if (want_jac) jac = Matrix::Zero(order, order);
        if (want_hess) hess.assign(static_cast<std::size_t>(order), Matrix::Zero(order, order));

        for (Index m = 1; m <= order; ++m) {
            const double bm = beta(m - 1);
            const Vector prev_a = a;
            const Matrix prev_jac = jac;
            const std::vector<Matrix> prev_hess = hess;
            for (Index i = 1; i < m; ++i) {
                a(i - 1) = prev_a(i - 1) - bm * prev_a(m - i - 1);
                if (want_jac) {
                    for (Index k = 1; k < m; ++k)
                        jac(i - 1, k - 1) = prev_jac(i - 1, k - 1) - bm * prev_jac(m - i - 1, k - 1);
                    jac(i - 1, m - 1) = -prev_a(m - i - 1);
                }
                if (want_hess) {
                    auto& h = hess[static_cast<std::size_t>(i - 1)];
                    const auto& hp = prev_hess[static_cast<std::size_t>(i - 1)];
                    const auto& hq = prev_hess[static_cast<std::size_t>(m - i - 1)];
                    for (Index k = 1; k < m; ++k) {
                        for (Index l = 1; l < m; ++l) h(k - 1, l - 1) = hp(k - 1, l - 1) - bm * hq(k - 1, l - 1);
                        h(k - 1, m - 1) = -prev_jac(m - i - 1, k - 1);
                        h(m - 1, k - 1) = h(k - 1, m - 1);
                    }
                    h(m - 1, m - 1) = 0.0;
                }
            }
            a(m - 1) = bm;
            if (want_jac) {
                jac.row(m - 1).setZero();
                jac(m - 1, m - 1) = 1.0;
            }
            if (want_hess) hess[static_cast<std::size_t>(m - 1)].setZero();
        }
    }
};

} // namespace

Vector parcor_to_ar(const Vector& beta) { return LevinsonSweep(beta, false, false).a; }

Matrix parcor_jacobian(const Vector& beta) { return LevinsonSweep(beta, true, false).jac; }

std::vector<Matrix> parcor_hessian(const Vector& beta) {
    return LevinsonSweep(beta, true, true).hess;
}

Vector ar_to_parcor(const Vector& a) {
    const Index order = a.size();
    Vector beta(order);
    Vector cur = a;
    for (Index m = order; m >= 1; --m) {
        const double bm = cur(m - 1);
        if (!(std::abs(bm) < 1.0))
            throw NonStationary("partial autocorrelation of order " + std::to_string(m) +
                                " has magnitude >= 1");
        beta(m - 1) = bm;
        Vector next(m - 1);
        for (Index i = 1; i < m; ++i) next(i - 1) = (cur(i - 1) + bm * cur(m - i - 1)) / (1.0 - bm * bm);
        cur = next;
    }
    return beta;
}

BoundedParcor unconstrained_to_parcor(double theta, double bound) {
    // (e^t - 1)/(e^t + 1) = tanh(t/2); 2 e^t/(e^t + 1)^2 = sech^2(t/2)/2.
    const double t = std::tanh(0.5 * theta);
    const double c = std::cosh(0.5 * theta);
    const double sech2 = 1.0 / (c * c);
    return {bound * t, 0.5 * bound * sech2, -0.5 * bound * sech2 * t};
}

ParcorChain parcor_chain(const Vector& theta, double bound, bool with_hessian) {
    const Index order = theta.size();
    ParcorChain out;
    out.beta.resize(order);
    Vector db(order), d2b(order);
    for (Index i = 0; i < order; ++i) {
        const auto t = unconstrained_to_parcor(theta(i), bound);
        out.beta(i) = t.beta;
        db(i) = t.dbeta;
        d2b(i) = t.d2beta;
    }
    LevinsonSweep sweep(out.beta, true, with_hessian);
    out.coefficients = sweep.a;
    out.jacobian = sweep.jac * db.asDiagonal();
    if (with_hessian) {
        out.hessian.reserve(static_cast<std::size_t>(order));
        for (Index i = 0; i < order; ++i) {
            Matrix h = db.asDiagonal() * sweep.hess[static_cast<std::size_t>(i)] * db.asDiagonal();
            h.diagonal() += sweep.jac.row(i).transpose().cwiseProduct(d2b);
            out.hessian.push_back(std::move(h));
        }
    }
    return out;
}

double companion_spectral_radius(const Vector& a) {
    const Index order = a.size();
    if (order == 0) return 0.0;
    Matrix c = Matrix::Zero(order, order);
    c.row(0) = a.transpose();
    for (Index i = 1; i < order; ++i) c(i, i - 1) = 1.0;
    Eigen::EigenSolver<Matrix> es(c, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace ssmgrad
