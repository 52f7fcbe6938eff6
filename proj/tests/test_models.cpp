#include "support.hpp"

#include "ssmgrad/arma.hpp"
#include "ssmgrad/errors.hpp"
#include "ssmgrad/gradient_filter.hpp"
#include "ssmgrad/hessian_filter.hpp"
#include "ssmgrad/optimize.hpp"
#include "ssmgrad/parcor.hpp"
#include "ssmgrad/seasonal.hpp"

#include <doctest.h>

#include <cmath>

using namespace ssmgrad;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Vector random_parcor(std::mt19937_64& rng, int n, double bound) {
    return testing::random_vector(rng, n, -bound, bound);
}

Matrix lyapunov_residual(const StateSpaceModel& m, double sigma2) {
    const auto& mm = m.matrices;
    return mm.F * m.initial.V0 * mm.F.transpose() + sigma2 * mm.G * mm.G.transpose() - m.initial.V0;
}

} // namespace

// ---------------------------------------------------------------- parcor

TEST_CASE("parcor to AR coefficients") {
    CHECK(parcor_to_ar(vec({0.7}))(0) == doctest::Approx(0.7));
    const Vector a = parcor_to_ar(vec({0.5, 0.2}));
    CHECK(a(0) == doctest::Approx(0.4));
    CHECK(a(1) == doctest::Approx(0.2));
}

TEST_CASE("parcor Jacobian by hand and against finite differences") {
    CHECK(parcor_jacobian(vec({0.3}))(0, 0) == 1.0);
    const Matrix j = parcor_jacobian(vec({0.5, 0.2}));
    CHECK(j(0, 0) == doctest::Approx(0.8));
    CHECK(j(0, 1) == doctest::Approx(-0.5));
    CHECK(j(1, 0) == doctest::Approx(0.0));
    CHECK(j(1, 1) == doctest::Approx(1.0));

    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 1 + rep % 6;
        const Vector beta = random_parcor(rng, n, 0.95);
        const Matrix jac = parcor_jacobian(beta);
        for (int k = 0; k < n; ++k) {
            const Matrix fd = testing::fd_matrix([](const Vector& b) { return Matrix(parcor_to_ar(b)); },
                                                 beta, k, 1e-7);
            CHECK(testing::max_rel(jac.col(k), fd) < 1e-6);
        }
    }
}

TEST_CASE("parcor second derivatives against finite differences of the Jacobian") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 2 + rep % 5;
        const Vector beta = random_parcor(rng, n, 0.9);
        const auto hess = parcor_hessian(beta);
        for (int l = 0; l < n; ++l) {
            const Matrix fd = testing::fd4_matrix([](const Vector& b) { return parcor_jacobian(b); },
                                                  beta, l, 1e-4);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k)
                    CHECK(std::abs(hess[static_cast<std::size_t>(i)](k, l) - fd(i, k)) < 1e-9);
        }
    }
}

TEST_CASE("bounded parcor map") {
    auto t0 = unconstrained_to_parcor(0.0, 1.0);
    CHECK(t0.beta == 0.0);
    CHECK(t0.dbeta == doctest::Approx(0.5));
    auto t1 = unconstrained_to_parcor(1.0, 1.0);
    CHECK(t1.beta == doctest::Approx(0.462117).epsilon(1e-6));
    CHECK(t1.dbeta == doctest::Approx(0.393224).epsilon(1e-6));
    CHECK(unconstrained_to_parcor(50.0, 0.99).beta == doctest::Approx(0.99));
    for (double t : {-2.0, 0.3, 1.7}) {
        const double h = 1e-5;
        const auto a = unconstrained_to_parcor(t, 0.9);
        const auto p = unconstrained_to_parcor(t + h, 0.9), m = unconstrained_to_parcor(t - h, 0.9);
        CHECK(a.dbeta == doctest::Approx((p.beta - m.beta) / (2 * h)).epsilon(1e-8));
        CHECK(a.d2beta == doctest::Approx((p.dbeta - m.dbeta) / (2 * h)).epsilon(1e-7));
    }
}

TEST_CASE("parcor chain derivatives against finite differences") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 1 + rep % 4;
        const Vector t = testing::random_vector(rng, n, -3, 3);
        const auto chain = parcor_chain(t, 0.99, true);
        for (int k = 0; k < n; ++k) {
            const Matrix fd = testing::fd4_matrix(
                [](const Vector& u) { return Matrix(parcor_chain(u, 0.99).coefficients); }, t, k, 1e-4);
            CHECK(testing::max_rel(chain.jacobian.col(k), fd) < 1e-8);
            const Matrix fdj = testing::fd4_matrix(
                [](const Vector& u) { return parcor_chain(u, 0.99).jacobian; }, t, k, 1e-4);
            for (int i = 0; i < n; ++i)
                for (int l = 0; l < n; ++l)
                    CHECK(std::abs(chain.hessian[static_cast<std::size_t>(i)](l, k) - fdj(i, l)) < 1e-8);
        }
    }
}

TEST_CASE("PARCORs inside the unit interval give stationary AR polynomials") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 500; ++rep) {
        const int n = 1 + rep % 8;
        CHECK(companion_spectral_radius(parcor_to_ar(random_parcor(rng, n, 0.999))) < 1.0);
    }
}

TEST_CASE("AR to PARCOR inverts the Levinson recursion") {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 1 + rep % 7;
        const Vector beta = random_parcor(rng, n, 0.95);
        const Vector a = parcor_to_ar(beta);
        CHECK((ar_to_parcor(a) - beta).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((parcor_to_ar(ar_to_parcor(a)) - a).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK_THROWS_AS(ar_to_parcor(vec({1.2})), NonStationary);
}

// ---------------------------------------------------------------- seasonal

TEST_CASE("seasonal dimensions and zero structure derivatives") {
    SeasonalSpec spec;
    spec.period = 4;
    const auto model = build_seasonal(spec, default_seasonal_theta(spec));
    CHECK(model.dims.state_dim == 5);
    CHECK(model.dims.param_dim == 3);
    CHECK(model.dims.noise_dim == 2);
    for (int j = 0; j < 3; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        CHECK(model.matrices.dF[uj].isZero(0.0));
        CHECK(model.matrices.dG[uj].isZero(0.0));
        CHECK(model.matrices.dH[uj].isZero(0.0));
    }
    CHECK(model.matrices.dQ[2].isZero(0.0));
    CHECK(model.matrices.dR[0] == 0.0);
    CHECK(model.matrices.dR[1] == 0.0);
    CHECK(validate_model(model).empty());

    Matrix trend(2, 2);
    trend << 2, -1, 1, 0;
    CHECK(model.matrices.F.topLeftCorner(2, 2) == trend);
    CHECK(model.matrices.F.block(2, 2, 1, 3) == RowVector::Constant(3, -1.0));
    CHECK(model.matrices.F(3, 2) == 1.0);
    CHECK(model.matrices.F(4, 3) == 1.0);
    CHECK(model.matrices.H == vec({1, 0, 1, 0, 0}).transpose());
}

TEST_CASE("seasonal AR row holds the Levinson coefficients") {
    SeasonalSpec spec;
    spec.period = 4;
    spec.ar_order = 2;
    spec.parcor_bound = 1.0;
    Vector theta = default_seasonal_theta(spec);
    theta(4) = 2.0 * std::atanh(0.5);
    theta(5) = 2.0 * std::atanh(0.2);
    const auto model = build_seasonal(spec, theta);
    CHECK(model.dims.state_dim == 7);
    CHECK(model.dims.param_dim == 6);
    CHECK(model.matrices.F(5, 5) == doctest::Approx(0.4));
    CHECK(model.matrices.F(5, 6) == doctest::Approx(0.2));
    CHECK(model.matrices.F(6, 5) == 1.0);
    CHECK(model.matrices.G(5, 2) == 1.0);
    CHECK(model.matrices.H(5) == 1.0);
    CHECK(validate_model(model).empty());
}

TEST_CASE("seasonal default theta and names") {
    const SeasonalModel plain(SeasonalSpec{});
    CHECK(plain.parameter_names() == std::vector<std::string>{"log_tau1sq", "log_tau2sq", "log_sigma2"});
    const Vector t = default_seasonal_theta(SeasonalSpec{});
    CHECK(t(0) == -12.20607265);
    CHECK(t(2) == -0.69314718);
    SeasonalSpec ar;
    ar.ar_order = 2;
    const Vector ta = default_seasonal_theta(ar);
    CHECK(ta.size() == 6);
    CHECK(ta(5) == -1.20485737);
    CHECK_THROWS_AS(build_seasonal(SeasonalSpec{}, Vector::Zero(4)), BadDimension);
}

TEST_CASE("seasonal gradients and Hessians agree with finite differences") {
    for (int ar_order : {0, 2}) {
        SeasonalSpec spec;
        spec.ar_order = ar_order;
        const SeasonalModel provider(spec);
        Vector truth = ar_order == 0 ? vec({-3, -4, 0}) : vec({-3, -4, -1, -0.5, 1.5, -0.5});
        auto model = build_seasonal(spec, truth, DerivativeOrder::none);
        model.initial.V0.setIdentity();
        const auto y = simulate(model, 100, 17).y;
        std::mt19937_64 rng(2);
        const Vector t = truth + testing::random_vector(rng, spec.param_dim(), -0.5, 0.5);

        const auto rep = run_hessian_filter(provider, t, y, HessianMethod::analytic);
        const Vector fd = fd_gradient(provider, t, y, 1e-5);
        for (int j = 0; j < spec.param_dim(); ++j)
            CHECK(relative_difference((*rep.gradient)(j), fd(j)) < 1e-6);
        const auto fdh = fd_hessian(provider, t, y, 1e-5);
        CHECK(testing::max_rel(*rep.hessian, *fdh.hessian) < 1e-6);
    }
}

TEST_CASE("seasonal structural coordinates") {
    SeasonalSpec spec;
    spec.ar_order = 1;
    const SeasonalModel provider(spec);
    const Vector t = vec({-1, -2, -3, 0.5, 0.7});
    const auto s = provider.structural(t);
    CHECK(s.values(3) == doctest::Approx(std::exp(0.5)));
    CHECK(s.jacobian(0, 0) == doctest::Approx(std::exp(-1.0)));
    CHECK(s.values(4) == doctest::Approx(0.99 * std::tanh(0.35)));
}

// ---------------------------------------------------------------- ARMA

TEST_CASE("impulse response") {
    const Vector g = impulse_response(vec({0.5}), Vector(), 3);
    CHECK(g(0) == 1.0);
    CHECK(g(1) == 0.5);
    CHECK(g(2) == 0.25);
    const Vector g11 = impulse_response(vec({0.5}), vec({0.2}), 2);
    CHECK(g11(1) == doctest::Approx(0.3));
    CHECK(g11(2) == doctest::Approx(0.15));
    const Vector gma = impulse_response(Vector(), vec({0.4}), 2);
    CHECK(gma(1) == doctest::Approx(-0.4));
    CHECK(gma(2) == 0.0);
}

TEST_CASE("autocovariance closed forms") {
    const Vector c = autocovariance(vec({0.5}), Vector(), 1.0, 3);
    CHECK(c(0) == doctest::Approx(4.0 / 3.0));
    CHECK(c(1) == doctest::Approx(2.0 / 3.0));
    CHECK(c(3) == doctest::Approx(1.0 / 6.0));
    const Vector w = autocovariance(Vector(), Vector(), 2.5, 2);
    CHECK(w(0) == 2.5);
    CHECK(w(1) == 0.0);
    CHECK(w(2) == 0.0);
    // MA(1): C0 = s2 (1 + b^2), C1 = -s2 b.
    const Vector m = autocovariance(Vector(), vec({0.4}), 2.0, 2);
    CHECK(m(0) == doctest::Approx(2.0 * 1.16));
    CHECK(m(1) == doctest::Approx(-0.8));
    CHECK(m(2) == doctest::Approx(0.0));
    CHECK_THROWS_AS(autocovariance(vec({1.5}), Vector(), 1.0, 2), SingularCovarianceSystem);
    CHECK_THROWS_AS(autocovariance(vec({1.0}), Vector(), 1.0, 2), SingularCovarianceSystem);
}

TEST_CASE("autocovariance matches sample moments of a long simulated series") {
    const Vector a = vec({1.0, -0.5}), b = vec({0.3});
    const double s2 = 0.7;
    const Vector c = autocovariance(a, b, s2, 2);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd(0.0, std::sqrt(s2));
    const std::size_t n = 1000000, burn = 1000;
    double y1 = 0, y2 = 0, v1 = 0;
    std::vector<double> ys;
    ys.reserve(n);
    for (std::size_t t = 0; t < n + burn; ++t) {
        const double v = nd(rng);
        const double y = a(0) * y1 + a(1) * y2 + v - b(0) * v1;
        y2 = y1;
        y1 = y;
        v1 = v;
        if (t >= burn) ys.push_back(y);
    }
    double s = 0.0, s4 = 0.0;
    for (double y : ys) {
        s += y * y;
        s4 += y * y * y * y;
    }
    const double var = s / static_cast<double>(n);
    // Serial correlation inflates the standard error; a long-run factor of 10 is generous.
    const double se = std::sqrt((s4 / static_cast<double>(n) - var * var) / static_cast<double>(n)) * 10.0;
    CHECK(std::abs(var - c(0)) < 3.0 * se);
    CHECK(std::abs(var - c(0)) < 0.02 * c(0));
}

TEST_CASE("initial covariance closed forms and Lyapunov identity") {
    const Matrix v = initial_covariance(vec({0.5}), Vector(), 1.0);
    CHECK(v.rows() == 1);
    CHECK(v(0, 0) == doctest::Approx(4.0 / 3.0));
    CHECK(initial_covariance(Vector(), Vector(), 3.0)(0, 0) == 3.0);

    const Matrix ma = initial_covariance(Vector(), vec({0.4}), 1.0);
    CHECK(ma(0, 0) == doctest::Approx(1.16));
    CHECK(ma(0, 1) == doctest::Approx(-0.4));
    CHECK(ma(1, 1) == doctest::Approx(0.16));

    ArmaSpec spec;
    spec.ar_order = 1;
    spec.ma_order = 1;
    spec.parameterization = ArmaParameterization::raw;
    const auto model = build_arma(spec, vec({0.5, 0.2}), DerivativeOrder::none);
    CHECK(lyapunov_residual(model, 1.0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("initial covariance derivatives") {
    const auto d = initial_covariance_derivatives(vec({0.5}), Vector(), 1.0);
    REQUIRE(d.da.size() == 1);
    CHECK(d.da[0](0, 0) == doctest::Approx(16.0 / 9.0));
    CHECK(d.db.empty());

    const auto dm = initial_covariance_derivatives(Vector(), vec({0.4, -0.3}), 1.0);
    CHECK(dm.da.empty());
    REQUIRE(dm.db.size() == 2);
    for (int r = 0; r < 2; ++r) {
        auto f = [](const Vector& b) { return initial_covariance(Vector(), b, 1.0); };
        CHECK(testing::max_rel(dm.db[static_cast<std::size_t>(r)],
                               testing::fd_matrix(f, vec({0.4, -0.3}), r, 1e-7)) < 1e-6);
    }

    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector a = parcor_to_ar(random_parcor(rng, 2, 0.9));
        const Vector b = parcor_to_ar(random_parcor(rng, 1, 0.9));
        const double s2 = 0.5 + rep * 0.1;
        const auto dd = initial_covariance_derivatives(a, b, s2);
        for (int p = 0; p < 2; ++p) {
            auto f = [&](const Vector& u) { return initial_covariance(u, b, s2); };
            CHECK(testing::max_rel(dd.da[static_cast<std::size_t>(p)], testing::fd4_matrix(f, a, p, 1e-4)) < 1e-6);
        }
        auto fb = [&](const Vector& u) { return initial_covariance(a, u, s2); };
        CHECK(testing::max_rel(dd.db[0], testing::fd4_matrix(fb, b, 0, 1e-4)) < 1e-6);
    }
}

TEST_CASE("ARMA state-space structure") {
    ArmaSpec spec;
    spec.ar_order = 2;
    spec.ma_order = 1;
    spec.parameterization = ArmaParameterization::raw;
    const auto model = build_arma(spec, vec({0.6, -0.3, 0.4}));
    Matrix F(2, 2);
    F << 0.6, 1, -0.3, 0;
    CHECK(model.matrices.F == F);
    CHECK(model.matrices.G == vec({1, -0.4}));
    CHECK(model.matrices.H == vec({1, 0}).transpose());
    CHECK(model.matrices.R == 0.0);
    CHECK(model.matrices.Q(0, 0) == 1.0);
    Matrix dF1 = Matrix::Zero(2, 2);
    dF1(1, 0) = 1.0;
    CHECK(model.matrices.dF[1] == dF1);
    CHECK(model.matrices.dG[2] == vec({0, -1}));
    CHECK(model.matrices.dG[0].isZero(0.0));
    for (const auto& dq : model.matrices.dQ) CHECK(dq.isZero(0.0));
    CHECK(validate_model(model).empty());

    CHECK_THROWS_AS(build_arma(spec, vec({1.2, 0.1, 0.0})), NonStationary);
    CHECK_THROWS_AS(build_arma(spec, vec({0.1, 0.1})), BadDimension);
}

TEST_CASE("transformed ARMA coordinates") {
    ArmaSpec spec;
    spec.ar_order = 2;
    spec.ma_order = 2;
    const auto z = transform_arma_params(Vector::Zero(4), spec);
    CHECK(z.a.isZero(0.0));
    CHECK(z.b.isZero(0.0));
    spec.ar_order = 1;
    spec.ma_order = 0;
    spec.parcor_bound = 1.0;
    CHECK(transform_arma_params(vec({1.0}), spec).a(0) == doctest::Approx(0.462117).epsilon(1e-6));

    ArmaSpec big;
    big.ar_order = 5;
    big.ma_order = 3;
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 200; ++rep) {
        const auto tr = transform_arma_params(testing::random_vector(rng, 8, -5, 5), big);
        CHECK(companion_spectral_radius(tr.a) < 1.0);
        // 1 - sum b_j z^j has the same companion matrix as an AR polynomial.
        CHECK(companion_spectral_radius(tr.b) < 1.0);
    }
}

TEST_CASE("transformed ARMA derivative stacks agree with finite differences of the model") {
    ArmaSpec spec;
    spec.ar_order = 2;
    spec.ma_order = 2;
    const Vector t = vec({0.8, -0.4, 0.5, 0.2});
    const auto model = build_arma(spec, t);
    for (int j = 0; j < 4; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        auto fF = [&](const Vector& u) { return build_arma(spec, u, DerivativeOrder::none).matrices.F; };
        auto fG = [&](const Vector& u) { return build_arma(spec, u, DerivativeOrder::none).matrices.G; };
        auto fV = [&](const Vector& u) { return build_arma(spec, u, DerivativeOrder::none).initial.V0; };
        CHECK(testing::max_rel(model.matrices.dF[uj], testing::fd4_matrix(fF, t, j, 1e-4)) < 1e-8);
        CHECK(testing::max_rel(model.matrices.dG[uj], testing::fd4_matrix(fG, t, j, 1e-4)) < 1e-8);
        CHECK(testing::max_rel(model.initial.dV0[uj], testing::fd4_matrix(fV, t, j, 1e-4)) < 1e-7);
    }
}

TEST_CASE("concentrated ARMA gradient agrees with finite differences") {
    ArmaSpec spec;
    spec.ar_order = 2;
    spec.ma_order = 1;
    const ArmaModel provider(spec);
    const Vector truth = vec({2.0, -1.5, 0.7});
    const auto y = simulate(build_arma(spec, truth, DerivativeOrder::none, 0.5), 200, 5).y;
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 5; ++rep) {
        const Vector t = truth + testing::random_vector(rng, 3, -1, 1);
        const auto rep_g = run_gradient_filter(provider, t, y);
        REQUIRE(rep_g.sigma2_hat.has_value());
        const Vector fd = fd_gradient(provider, t, y, 1e-3);
        for (int j = 0; j < 3; ++j) CHECK(relative_difference((*rep_g.gradient)(j), fd(j)) < 1e-4);
    }
}

TEST_CASE("concentrated likelihood equals the full likelihood at the profiled variance") {
    ArmaSpec spec;
    spec.ar_order = 1;
    spec.ma_order = 2;
    const ArmaModel provider(spec);
    const Vector t = vec({0.9, -0.3, 0.6});
    const auto y = simulate(build_arma(spec, t, DerivativeOrder::none, 3.0), 300, 8).y;
    const auto conc = run_filter(provider, t, y);
    const auto full = run_filter(build_arma(spec, t, DerivativeOrder::none, *conc.sigma2_hat), y);
    CHECK(std::abs(conc.loglik - full.loglik) <= 1e-10 * std::abs(full.loglik));
}

TEST_CASE("ARMA provider metadata") {
    ArmaSpec spec;
    spec.ar_order = 2;
    spec.ma_order = 1;
    const ArmaModel provider(spec);
    CHECK(provider.concentrated_variance());
    CHECK_FALSE(provider.has_second_derivatives());
    CHECK(provider.name() == "arma(2,1)");
    CHECK(provider.parameter_names() == std::vector<std::string>{"alpha1", "alpha2", "delta1"});
    const auto s = provider.structural(vec({0.0, 0.0, 0.0}));
    CHECK(s.names == std::vector<std::string>{"a1", "a2", "b1"});
    CHECK_THROWS_AS(ArmaModel(ArmaSpec{}), BadDimension);
}
