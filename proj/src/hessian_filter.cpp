#include "ssmgrad/hessian_filter.hpp"

#include "ssmgrad/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ssmgrad {

namespace {

using Index = Eigen::Index;

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

const StructureSecondDerivatives& second_of(const ModelMatrices& mm) {
    if (!mm.second) throw MissingSecondDerivatives();
    return *mm.second;
}

// Run-constant pieces of the second-order prediction.
struct HessianStructure {
    detail::GradientStructure first;
    PairStack<Matrix> d2Noise;  // d2(G Q G^T)
    std::vector<bool> has_dF;
    PairStack<char> has_d2F;

    explicit HessianStructure(const ModelMatrices& mm) : first(mm) {
        const auto& s = second_of(mm);
        const auto p = mm.dF.size();
        d2Noise = PairStack<Matrix>(p, Matrix());
        has_d2F = PairStack<char>(p, 0);
        has_dF = first.has_dF;
        const Matrix& G = mm.G;
        const Matrix& Q = mm.Q;
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = j; k < p; ++k) {
                Matrix half = s.G(j, k) * Q * G.transpose() + mm.dG[j] * mm.dQ[k] * G.transpose() +
                              mm.dG[k] * mm.dQ[j] * G.transpose();
                Matrix cross = mm.dG[j] * Q * mm.dG[k].transpose();
                d2Noise(j, k) = symmetrized(G * s.Q(j, k) * G.transpose() + half + half.transpose() +
                                            cross + cross.transpose());
                has_d2F(j, k) = !s.F(j, k).isZero(0.0);
            }
        }
    }
};

HessFilterState hess_predict_impl(const HessFilterState& hs, const ModelMatrices& mm,
                                  const HessianStructure& hx) {
    const auto& s = second_of(mm);
    const auto p = hs.grad.dx.size();
    const Matrix& F = mm.F;
    const Vector& x = hs.grad.base.x;
    const Matrix& V = hs.grad.base.V;
    const auto& dx = hs.grad.dx;
    const auto& dV = hs.grad.dV;

    HessFilterState out;
    out.d2x = PairStack<Vector>(p, Vector());
    out.d2V = PairStack<Matrix>(p, Matrix());
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = j; k < p; ++k) {
            Vector d2x = F * hs.d2x(j, k);
            Matrix d2V = F * hs.d2V(j, k) * F.transpose() + hx.d2Noise(j, k);
            Matrix half = Matrix::Zero(F.rows(), F.cols());
            if (hx.has_dF[j]) {
                d2x += mm.dF[j] * dx[k];
                half += mm.dF[j] * dV[k] * F.transpose();
            }
            if (hx.has_dF[k]) {
                d2x += mm.dF[k] * dx[j];
                half += mm.dF[k] * dV[j] * F.transpose();
            }
            if (hx.has_d2F(j, k)) {
                d2x += s.F(j, k) * x;
                half += s.F(j, k) * V * F.transpose();
            }
            if (hx.has_dF[j] && hx.has_dF[k]) {
                const Matrix cross = mm.dF[j] * V * mm.dF[k].transpose();
                d2V += cross + cross.transpose();
            }
            d2V += half + half.transpose();
            out.d2x(j, k) = std::move(d2x);
            out.d2V(j, k) = symmetrized(d2V);
        }
    }
    out.grad = detail::grad_predict(hs.grad, mm, hx.first);
    return out;
}

HessStepResult hess_update_impl(const HessFilterState& predicted, const ModelMatrices& mm, double y,
                                std::size_t step) {
    const auto& s = second_of(mm);
    const auto p = predicted.grad.dx.size();
    auto first = grad_update(predicted.grad, mm, y, step);

    const RowVector& H = mm.H;
    const Vector& x = predicted.grad.base.x;
    const Matrix& V = predicted.grad.base.V;
    const auto& dx = predicted.grad.dx;
    const auto& dV = predicted.grad.dV;
    const double r = first.innovation.r;
    const double eps = first.innovation.eps;
    const Vector& K = first.innovation.gain;
    const Vector& deps = first.grad.deps;
    const Vector& dr = first.grad.dr;
    const auto& dK = first.grad.dgain;
    const Vector P = V * H.transpose();
    const RowVector HV = H * V;

    std::vector<Vector> dP(p);
    std::vector<bool> has_dH(p);
    for (std::size_t j = 0; j < p; ++j) {
        dP[j] = dV[j] * H.transpose() + V * mm.dH[j].transpose();
        has_dH[j] = !mm.dH[j].isZero(0.0);
    }

    HessStepResult out;
    out.hess.d2eps = PairStack<double>(p, 0.0);
    out.hess.d2r = PairStack<double>(p, 0.0);
    out.hess.d2gain = PairStack<Vector>(p, Vector());
    out.state.d2x = PairStack<Vector>(p, Vector());
    out.state.d2V = PairStack<Matrix>(p, Matrix());
    const double r2 = r * r, r3 = r2 * r;
    for (std::size_t j = 0; j < p; ++j) {
        const auto jj = static_cast<Index>(j);
        for (std::size_t k = j; k < p; ++k) {
            const auto kk = static_cast<Index>(k);
            const RowVector& dHj = mm.dH[j];
            const RowVector& dHk = mm.dH[k];
            const RowVector& d2H = s.H(j, k);
            const bool any_d2H = !d2H.isZero(0.0);
            const Vector& d2xp = predicted.d2x(j, k);
            const Matrix& d2Vp = predicted.d2V(j, k);

            double d2eps = -H.dot(d2xp) - dHj.dot(dx[k]) - dHk.dot(dx[j]) - d2H.dot(x);

            const Vector d2VHt = d2Vp * H.transpose();
            double d2r = H.dot(d2VHt) + s.R(j, k) + 2.0 * d2H.dot(P) +
                         2.0 * (dHj.dot(dV[k] * H.transpose()) + dHk.dot(dV[j] * H.transpose())) +
                         dHj.dot(V * dHk.transpose()) + dHk.dot(V * dHj.transpose());

            Vector d2P = d2VHt;
            if (has_dH[k]) d2P += dV[j] * dHk.transpose();
            if (has_dH[j]) d2P += dV[k] * dHj.transpose();
            if (any_d2H) d2P += V * d2H.transpose();

            Vector d2K = d2P / r - (dP[j] * dr(kk) + dP[k] * dr(jj)) / r2 +
                         P * (2.0 * dr(jj) * dr(kk) / r3) - P * (d2r / r2);

            Vector d2xn = d2xp + K * d2eps + d2K * eps + dK[j] * deps(kk) + dK[k] * deps(jj);

            Matrix sub = d2K * HV + K * (H * d2Vp) + dK[j] * (H * dV[k]) + dK[k] * (H * dV[j]);
            if (any_d2H) sub += K * (d2H * V);
            if (has_dH[k]) sub += dK[j] * (dHk * V) + K * (dHk * dV[j]);
            if (has_dH[j]) sub += dK[k] * (dHj * V) + K * (dHj * dV[k]);

            out.state.d2x(j, k) = std::move(d2xn);
            out.state.d2V(j, k) = symmetrized(d2Vp - sub);
            out.hess.d2eps(j, k) = d2eps;
            out.hess.d2r(j, k) = d2r;
            out.hess.d2gain(j, k) = std::move(d2K);
        }
    }
    out.state.grad = std::move(first.state);
    out.innovation = std::move(first.innovation);
    out.grad = std::move(first.grad);
    return out;
}

void check_hess_records(std::span<const InnovationRecord> innovations,
                        std::span<const GradInnovation> grads, std::span<const HessInnovation> hess) {
    if (innovations.empty() || innovations.size() != grads.size() ||
        innovations.size() != hess.size())
        throw BadDimension("innovation, gradient and Hessian records differ in length");
}

// Sums over steps of the pieces shared by both Hessian assemblies.
struct CurvatureSums {
    Matrix log_r;        // sum of d2(log r)
    Matrix weighted_sq;  // sum of d2(eps^2 / r)
    Vector weighted_sq_grad;
    double weighted_sq_total = 0.0;
};

CurvatureSums curvature_sums(std::span<const InnovationRecord> innovations,
                             std::span<const GradInnovation> grads,
                             std::span<const HessInnovation> hess) {
    check_hess_records(innovations, grads, hess);
    const auto p = static_cast<std::size_t>(grads.front().dr.size());
    PairStack<CompensatedSum> lr(p, CompensatedSum{}), ws(p, CompensatedSum{});
    std::vector<CompensatedSum> wg(p);
    CompensatedSum wt;
    for (std::size_t n = 0; n < innovations.size(); ++n) {
        const double r = innovations[n].r, e = innovations[n].eps;
        const double r2 = r * r, r3 = r2 * r;
        const Vector& de = grads[n].deps;
        const Vector& dr = grads[n].dr;
        wt += e * e / r;
        for (std::size_t j = 0; j < p; ++j) {
            const auto jj = static_cast<Index>(j);
            wg[j] += 2.0 * e * de(jj) / r - e * e * dr(jj) / r2;
            for (std::size_t k = j; k < p; ++k) {
                const auto kk = static_cast<Index>(k);
                const double d2r = hess[n].d2r(j, k), d2e = hess[n].d2eps(j, k);
                lr(j, k) += d2r / r - dr(jj) * dr(kk) / r2;
                ws(j, k) += 2.0 * de(jj) * de(kk) / r + 2.0 * e * d2e / r -
                            2.0 * e * (de(jj) * dr(kk) + de(kk) * dr(jj)) / r2 - e * e * d2r / r2 +
                            2.0 * e * e * dr(jj) * dr(kk) / r3;
            }
        }
    }
    CurvatureSums out;
    const auto pi = static_cast<Index>(p);
    out.log_r.resize(pi, pi);
    out.weighted_sq.resize(pi, pi);
    out.weighted_sq_grad.resize(pi);
    for (std::size_t j = 0; j < p; ++j) {
        out.weighted_sq_grad(static_cast<Index>(j)) = wg[j].value();
        for (std::size_t k = 0; k < p; ++k) {
            out.log_r(static_cast<Index>(j), static_cast<Index>(k)) = lr(j, k).value();
            out.weighted_sq(static_cast<Index>(j), static_cast<Index>(k)) = ws(j, k).value();
        }
    }
    out.weighted_sq_total = wt.value();
    return out;
}

Vector fd_step(const Vector& theta, double c) {
    return (c * theta.cwiseAbs().cwiseMax(1.0)).eval();
}

} // namespace

HessFilterState HessFilterState::from_initial(const InitialCondition& ic) {
    const auto p = ic.dx0.size();
    HessFilterState hs;
    hs.grad = GradFilterState::from_initial(ic);
    hs.d2x = ic.d2x0 ? *ic.d2x0 : PairStack<Vector>(p, Vector::Zero(ic.x0.size()));
    hs.d2V = ic.d2V0 ? *ic.d2V0 : PairStack<Matrix>(p, Matrix::Zero(ic.V0.rows(), ic.V0.cols()));
    return hs;
}

HessFilterState hess_predict(const HessFilterState& hs, const ModelMatrices& mm) {
    return hess_predict_impl(hs, mm, HessianStructure(mm));
}

HessStepResult hess_update(const HessFilterState& predicted, const ModelMatrices& mm, double y,
                           std::size_t step) {
    return hess_update_impl(predicted, mm, y, step);
}

HessStepResult hess_step(const HessFilterState& filtered, const ModelMatrices& mm, double y,
                         std::size_t step) {
    return hess_update_impl(hess_predict(filtered, mm), mm, y, step);
}

Matrix hessian_from_innovations(std::span<const InnovationRecord> innovations,
                                std::span<const GradInnovation> grads,
                                std::span<const HessInnovation> hess) {
    const auto s = curvature_sums(innovations, grads, hess);
    const Matrix h = -0.5 * (s.log_r + s.weighted_sq);
    return symmetrized(h);
}

Matrix concentrated_hessian(std::span<const InnovationRecord> innovations,
                            std::span<const GradInnovation> grads,
                            std::span<const HessInnovation> hess) {
    const auto s = curvature_sums(innovations, grads, hess);
    const auto n = static_cast<double>(innovations.size());
    const double S = s.weighted_sq_total;
    const Matrix h = -0.5 * (n * s.weighted_sq / S -
                             n * s.weighted_sq_grad * s.weighted_sq_grad.transpose() / (S * S) +
                             s.log_r);
    return symmetrized(h);
}

LikelihoodReport run_hessian_filter(const StateSpaceModel& model, std::span<const double> y,
                                    bool concentrated) {
    detail::check_series(y);
    const auto& mm = model.matrices;
    if (mm.dF.empty() || model.initial.dV0.size() != mm.dF.size())
        throw BadDimension("model lacks complete first-derivative stacks");
    const HessianStructure hx(mm);
    detail::count_filter_pass();

    LikelihoodReport report;
    std::vector<HessInnovation> hess;
    report.innovations.reserve(y.size());
    report.grad_innovations.reserve(y.size());
    hess.reserve(y.size());
    detail::LikelihoodAccumulator acc;
    auto state = HessFilterState::from_initial(model.initial);
    for (std::size_t n = 0; n < y.size(); ++n) {
        auto upd = hess_update_impl(hess_predict_impl(state, mm, hx), mm, y[n], n);
        state = std::move(upd.state);
        acc.add(upd.innovation);
        report.innovations.push_back(std::move(upd.innovation));
        report.grad_innovations.push_back(std::move(upd.grad));
        hess.push_back(std::move(upd.hess));
    }
    acc.finish(report, concentrated);
    if (concentrated) {
        report.gradient = concentrated_gradient(report.innovations, report.grad_innovations,
                                                *report.sigma2_hat);
        report.hessian = concentrated_hessian(report.innovations, report.grad_innovations, hess);
    } else {
        report.gradient = gradient_from_innovations(report.innovations, report.grad_innovations);
        report.hessian = hessian_from_innovations(report.innovations, report.grad_innovations, hess);
    }
    report.hessian_source = HessianSource::analytic;
    return report;
}

LikelihoodReport fd_hessian(const ModelProvider& provider, const Vector& theta,
                            std::span<const double> y, double fd_constant) {
    auto report = run_gradient_filter(provider, theta, y);
    const Index p = theta.size();
    const Vector step = fd_step(theta, fd_constant);
    Matrix h(p, p);
    for (Index j = 0; j < p; ++j) {
        Vector up = theta, down = theta;
        up(j) += step(j);
        down(j) -= step(j);
        const Vector gu = *run_gradient_filter(provider, up, y).gradient;
        const Vector gd = *run_gradient_filter(provider, down, y).gradient;
        h.col(j) = (gu - gd) / (up(j) - down(j));
    }
    report.hessian = symmetrized(h);
    report.hessian_source = HessianSource::finite_difference;
    return report;
}

LikelihoodReport run_hessian_filter(const ModelProvider& provider, const Vector& theta,
                                    std::span<const double> y, HessianMethod method) {
    if (method == HessianMethod::automatic)
        method = provider.has_second_derivatives() ? HessianMethod::analytic
                                                   : HessianMethod::finite_difference;
    if (method == HessianMethod::finite_difference) return fd_hessian(provider, theta, y);
    if (!provider.has_second_derivatives()) throw MissingSecondDerivatives();
    const auto model = provider.evaluate(theta, DerivativeOrder::second);
    return run_hessian_filter(model, y, provider.concentrated_variance());
}

} // namespace ssmgrad
