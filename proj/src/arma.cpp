#include "ssmgrad/arma.hpp"

#include "ssmgrad/errors.hpp"
#include "ssmgrad/parcor.hpp"

#include <Eigen/LU>

#include <cassert>
#include <cmath>
#include <cstdlib>

namespace ssmgrad {

namespace {

using Index = Eigen::Index;

// Forward-mode scalar: value and one directional derivative.
struct Dual {
    double v = 0.0;
    double d = 0.0;
};
Dual operator+(Dual x, Dual y) { return {x.v + y.v, x.d + y.d}; }
Dual operator-(Dual x, Dual y) { return {x.v - y.v, x.d - y.d}; }
Dual operator*(Dual x, Dual y) { return {x.v * y.v, x.d * y.v + x.v * y.d}; }
Dual operator*(double s, Dual x) { return {s * x.v, s * x.d}; }
Dual& operator+=(Dual& x, Dual y) { return x = x + y; }
Dual& operator-=(Dual& x, Dual y) { return x = x - y; }

// Entries of the stationary state covariance, 1-based a[1..m], b[1..l],
// C[0..] autocovariances and g[0..] impulse response (g for negative lags is 0).
// Returns the k*k entries row-major with V_ij for i <= j mirrored.
template <class T>
std::vector<T> assemble_state_covariance(int k, int m, int l, const std::vector<T>& a,
                                         const std::vector<T>& b, const std::vector<T>& C,
                                         const std::vector<T>& g, double sigma2) {
    auto cov = [&](int lag) { return C[static_cast<std::size_t>(std::abs(lag))]; };
    auto imp = [&](int s) { return s < 0 ? T{} : g[static_cast<std::size_t>(s)]; };

    std::vector<T> V(static_cast<std::size_t>(k * k), T{});
    auto at = [&](int i, int j) -> T& { return V[static_cast<std::size_t>((i - 1) * k + (j - 1))]; };

    at(1, 1) = cov(0);
    for (int i = 2; i <= k; ++i) {
        T v{};
        for (int j = i; j <= m; ++j) v += a[j] * cov(j + 1 - i);
        for (int j = i - 1; j <= l; ++j) v -= sigma2 * (b[j] * imp(j + 1 - i));
        at(1, i) = v;
    }
    for (int i = 2; i <= k; ++i) {
        for (int j = i; j <= k; ++j) {
            T v{};
            for (int p = i; p <= m; ++p)
                for (int q = j; q <= m; ++q) v += a[p] * a[q] * cov(q - j - p + i);
            for (int p = i; p <= m; ++p)
                for (int q = j - 1; q <= l; ++q) v -= sigma2 * (a[p] * b[q] * imp(q - j - p + i));
            for (int p = i - 1; p <= l; ++p)
                for (int q = j; q <= m; ++q) v -= sigma2 * (b[p] * a[q] * imp(p - i - q + j));
            for (int p = i - 1; p + j - i <= l; ++p) v += sigma2 * (b[p] * b[p + j - i]);
            at(i, j) = v;
        }
    }
    for (int i = 1; i <= k; ++i)
        for (int j = 1; j < i; ++j) at(i, j) = at(j, i);
    return V;
}

double coef(const Vector& v, int i) { return i >= 1 && i <= v.size() ? v(i - 1) : 0.0; }

// Coefficient matrix of the autocovariance equations for lags 0..M.
Matrix covariance_system(const Vector& a, int M) {
    const int m = static_cast<int>(a.size());
    Matrix A = Matrix::Identity(M + 1, M + 1);
    for (int k = 0; k <= M; ++k)
        for (int i = 1; i <= m; ++i) A(k, std::abs(k - i)) -= a(i - 1);
    return A;
}

struct CovarianceSolver {
    Eigen::PartialPivLU<Matrix> lu;
    int M;

    CovarianceSolver(const Vector& a) : M(static_cast<int>(a.size())) {
        if (a.size() > 0 && !(companion_spectral_radius(a) < 1.0))
            throw SingularCovarianceSystem("autocovariance undefined: AR part is not stationary");
        lu.compute(covariance_system(a, M));
        if (!(lu.rcond() > 1e-14))
            throw SingularCovarianceSystem("autocovariance equations are numerically singular");
    }
};

// sum_{i=max(k,1)}^{l} b_i h_{i-k}
double ma_tail(const Vector& b, const Vector& h, int k) {
    double s = 0.0;
    for (int i = std::max(k, 1); i <= b.size(); ++i) s += b(i - 1) * h(i - k);
    return s;
}

Vector extend_covariance(const Vector& a, const Vector& b, double sigma2, const Vector& g,
                         Vector head, int upto) {
    const int m = static_cast<int>(a.size());
    Vector C = Vector::Zero(upto + 1);
    const int known = static_cast<int>(std::min<Index>(head.size(), upto + 1));
    C.head(known) = head.head(known);
    for (int k = known; k <= upto; ++k) {
        double v = 0.0;
        for (int i = 1; i <= m; ++i) v += a(i - 1) * C(std::abs(k - i));
        C(k) = v - sigma2 * ma_tail(b, g, k);
    }
    return C;
}

} // namespace

void ArmaSpec::validate() const {
    if (ar_order < 0 || ma_order < 0) throw BadDimension("ARMA orders must be >= 0");
    if (ar_order + ma_order < 1) throw BadDimension("ARMA model needs at least one coefficient");
    if (!(parcor_bound > 0.0 && parcor_bound <= 1.0))
        throw BadDimension("PARCOR bound must lie in (0, 1]");
}

Vector impulse_response(const Vector& a, const Vector& b, int upto) {
    Vector g = Vector::Zero(std::max(upto, 0) + 1);
    g(0) = 1.0;
    for (int i = 1; i <= upto; ++i) {
        double v = -coef(b, i);
        for (int j = 1; j <= std::min<int>(i, static_cast<int>(a.size())); ++j) v += a(j - 1) * g(i - j);
        g(i) = v;
    }
    return g;
}

Vector autocovariance(const Vector& a, const Vector& b, double sigma2, int upto) {
    const CovarianceSolver solver(a);
    const int M = solver.M;
    const Vector g = impulse_response(a, b, static_cast<int>(std::max(b.size(), Index{1})));
    Vector rhs(M + 1);
    for (int k = 0; k <= M; ++k) rhs(k) = sigma2 * ((k == 0 ? 1.0 : 0.0) - ma_tail(b, g, k));
    return extend_covariance(a, b, sigma2, g, solver.lu.solve(rhs), upto);
}

StationaryInit stationary_init(const Vector& a, const Vector& b, double sigma2,
                               bool with_derivatives) {
    const int m = static_cast<int>(a.size());
    const int l = static_cast<int>(b.size());
    const int k = std::max(m, l + 1);
    const CovarianceSolver solver(a);
    const int M = solver.M;

    StationaryInit out;
    out.g = impulse_response(a, b, k);
    Vector rhs(M + 1);
    for (int j = 0; j <= M; ++j) rhs(j) = sigma2 * ((j == 0 ? 1.0 : 0.0) - ma_tail(b, out.g, j));
    const Vector C = solver.lu.solve(rhs);
    out.cov = extend_covariance(a, b, sigma2, out.g, C, k);

    std::vector<double> av(m + 1, 0.0), bv(l + 1, 0.0), Cv(k + 1), gv(k + 1);
    for (int i = 1; i <= m; ++i) av[i] = a(i - 1);
    for (int i = 1; i <= l; ++i) bv[i] = b(i - 1);
    for (int i = 0; i <= k; ++i) {
        Cv[i] = out.cov(i);
        gv[i] = out.g(i);
    }
    {
        const auto V = assemble_state_covariance<double>(k, m, l, av, bv, Cv, gv, sigma2);
        out.V0 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(V.data(), k, k);
        out.V0 = 0.5 * (out.V0 + out.V0.transpose()).eval();
    }
    if (!with_derivatives) return out;

    // Derivative of V0 along one coefficient: dg by its recursion, dC from the
    // autocovariance equations differentiated (same coefficient matrix), then
    // the product rule through the V0 entries.
    auto directional = [&](bool is_ar, int p) {
        Vector dg = Vector::Zero(k + 1);
        for (int i = 1; i <= k; ++i) {
            double v = 0.0;
            for (int j = 1; j <= std::min(i, m); ++j) v += a(j - 1) * dg(i - j);
            if (is_ar && i >= p) v += out.g(i - p);
            if (!is_ar && i == p) v -= 1.0;
            dg(i) = v;
        }
        Vector drhs(M + 1);
        for (int j = 0; j <= M; ++j) {
            double v = -sigma2 * ma_tail(b, dg, j);
            if (is_ar) v += out.cov(std::abs(j - p));
            if (!is_ar && p >= j) v -= sigma2 * out.g(p - j);
            drhs(j) = v;
        }
        const Vector dC = solver.lu.solve(drhs);

        std::vector<Dual> ad(m + 1), bd(l + 1), Cd(k + 1), gd(k + 1);
        for (int i = 1; i <= m; ++i) ad[i] = {av[i], is_ar && i == p ? 1.0 : 0.0};
        for (int i = 1; i <= l; ++i) bd[i] = {bv[i], !is_ar && i == p ? 1.0 : 0.0};
        for (int i = 0; i <= k; ++i) {
            Cd[i] = {Cv[i], i <= M ? dC(i) : 0.0};
            gd[i] = {gv[i], dg(i)};
        }
        const auto V = assemble_state_covariance<Dual>(k, m, l, ad, bd, Cd, gd, sigma2);
        Matrix dV(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) dV(i, j) = V[static_cast<std::size_t>(i * k + j)].d;
        return Matrix(0.5 * (dV + dV.transpose()));
    };
    for (int p = 1; p <= m; ++p) out.dV0_da.push_back(directional(true, p));
    for (int r = 1; r <= l; ++r) out.dV0_db.push_back(directional(false, r));
    return out;
}

Matrix initial_covariance(const Vector& a, const Vector& b, double sigma2) {
    return stationary_init(a, b, sigma2, false).V0;
}

InitialCovarianceDerivatives initial_covariance_derivatives(const Vector& a, const Vector& b,
                                                            double sigma2) {
    auto init = stationary_init(a, b, sigma2, true);
    return {std::move(init.dV0_da), std::move(init.dV0_db)};
}

ArmaTransform transform_arma_params(const Vector& theta, const ArmaSpec& spec) {
    spec.validate();
    const int m = spec.ar_order, l = spec.ma_order, p = spec.param_dim();
    if (theta.size() != p)
        throw BadDimension("ARMA(" + std::to_string(m) + "," + std::to_string(l) + ") expects " +
                           std::to_string(p) + " parameters, got " + std::to_string(theta.size()));
    ArmaTransform out;
    out.jacobian = Matrix::Zero(p, p);
    if (spec.parameterization == ArmaParameterization::raw) {
        out.a = theta.head(m);
        out.b = theta.tail(l);
        out.jacobian.setIdentity();
        return out;
    }
    const auto ar = parcor_chain(theta.head(m), spec.parcor_bound);
    const auto ma = parcor_chain(theta.tail(l), spec.parcor_bound);
    out.a = ar.coefficients;
    out.b = ma.coefficients;
    out.jacobian.topLeftCorner(m, m) = ar.jacobian;
    out.jacobian.bottomRightCorner(l, l) = ma.jacobian;
    return out;
}

StateSpaceModel build_arma(const ArmaSpec& spec, const Vector& theta, DerivativeOrder order,
                           double sigma2) {
    const auto tr = transform_arma_params(theta, spec);
    if (spec.parameterization == ArmaParameterization::raw && tr.a.size() > 0 &&
        !(companion_spectral_radius(tr.a) < 1.0))
        throw NonStationary("AR coefficients are not stationary");

    const int m = spec.ar_order, l = spec.ma_order, k = spec.state_dim(), p = spec.param_dim();
    const bool derivs = order != DerivativeOrder::none;
    const auto init = stationary_init(tr.a, tr.b, sigma2, derivs);

    StateSpaceModel model;
    model.dims = {k, 1, p};
    auto& mm = model.matrices;
    mm = derivs ? ModelMatrices::zeros(model.dims) : ModelMatrices{};
    mm.F = Matrix::Zero(k, k);
    mm.G = Matrix::Zero(k, 1);
    mm.H = RowVector::Zero(k);
    for (int i = 0; i < m; ++i) mm.F(i, 0) = tr.a(i);
    for (int i = 0; i + 1 < k; ++i) mm.F(i, i + 1) = 1.0;
    mm.G(0, 0) = 1.0;
    for (int i = 0; i < l; ++i) mm.G(i + 1, 0) = -tr.b(i);
    mm.H(0) = 1.0;
    mm.Q = Matrix::Constant(1, 1, sigma2);
    mm.R = 0.0;

    auto& ic = model.initial;
    ic.x0 = Vector::Zero(k);
    ic.V0 = init.V0;

#ifndef NDEBUG
    {
        const Matrix lyap = mm.F * ic.V0 * mm.F.transpose() + sigma2 * mm.G * mm.G.transpose();
        assert((lyap - ic.V0).cwiseAbs().maxCoeff() <=
               1e-8 * std::max(1.0, ic.V0.cwiseAbs().maxCoeff()));
    }
#endif

    if (!derivs) return model;

    // Derivatives in (a, b), then through the coordinate Jacobian.
    ic.dx0.assign(static_cast<std::size_t>(p), Vector::Zero(k));
    ic.dV0.assign(static_cast<std::size_t>(p), Matrix::Zero(k, k));
    for (int j = 0; j < p; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        for (int i = 0; i < m; ++i) {
            const double w = tr.jacobian(i, j);
            if (w == 0.0) continue;
            mm.dF[jj](i, 0) += w;
            ic.dV0[jj] += w * init.dV0_da[static_cast<std::size_t>(i)];
        }
        for (int q = 0; q < l; ++q) {
            const double w = tr.jacobian(m + q, j);
            if (w == 0.0) continue;
            mm.dG[jj](q + 1, 0) -= w;
            ic.dV0[jj] += w * init.dV0_db[static_cast<std::size_t>(q)];
        }
    }
    return model;
}

ArmaModel::ArmaModel(ArmaSpec spec) : spec_(spec) { spec_.validate(); }

ArmaCoefficients ArmaModel::coefficients(const Vector& theta, double sigma2) const {
    auto tr = transform_arma_params(theta, spec_);
    return {std::move(tr.a), std::move(tr.b), sigma2};
}

std::string ArmaModel::name() const {
    return "arma(" + std::to_string(spec_.ar_order) + "," + std::to_string(spec_.ma_order) + ")";
}

std::vector<std::string> ArmaModel::parameter_names() const {
    const bool raw = spec_.parameterization == ArmaParameterization::raw;
    std::vector<std::string> names;
    for (int i = 1; i <= spec_.ar_order; ++i) names.push_back((raw ? "a" : "alpha") + std::to_string(i));
    for (int i = 1; i <= spec_.ma_order; ++i) names.push_back((raw ? "b" : "delta") + std::to_string(i));
    return names;
}

StructuralParams ArmaModel::structural(const Vector& theta) const {
    const auto tr = transform_arma_params(theta, spec_);
    StructuralParams out;
    for (int i = 1; i <= spec_.ar_order; ++i) out.names.push_back("a" + std::to_string(i));
    for (int i = 1; i <= spec_.ma_order; ++i) out.names.push_back("b" + std::to_string(i));
    out.values.resize(spec_.param_dim());
    out.values << tr.a, tr.b;
    out.jacobian = tr.jacobian;
    return out;
}

} // namespace ssmgrad
