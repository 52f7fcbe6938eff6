#include "ssmgrad/gradient_filter.hpp"

#include "ssmgrad/errors.hpp"

namespace ssmgrad {

namespace {

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

void check_first_derivatives(const ModelMatrices& mm, const InitialCondition& ic) {
    const auto p = mm.dF.size();
    if (p == 0 || mm.dG.size() != p || mm.dH.size() != p || mm.dQ.size() != p ||
        mm.dR.size() != p || ic.dx0.size() != p || ic.dV0.size() != p)
        throw BadDimension("model lacks complete first-derivative stacks");
}

} // namespace

GradFilterState GradFilterState::from_initial(const InitialCondition& ic) {
    return {{ic.x0, ic.V0}, ic.dx0, ic.dV0};
}

namespace detail {

GradientStructure::GradientStructure(const ModelMatrices& mm)
    : GQGt(mm.G * mm.Q * mm.G.transpose()) {
    const auto p = mm.dF.size();
    dNoise.reserve(p);
    for (std::size_t j = 0; j < p; ++j) {
        const Matrix GQdGt = mm.G * mm.Q * mm.dG[j].transpose();
        dNoise.push_back(mm.G * mm.dQ[j] * mm.G.transpose() + GQdGt + GQdGt.transpose());
        has_dF.push_back(!mm.dF[j].isZero(0.0));
        has_dH.push_back(!mm.dH[j].isZero(0.0));
    }
}

GradFilterState grad_predict(const GradFilterState& gs, const ModelMatrices& mm,
                             const GradientStructure& gsx) {
    const auto p = gs.dx.size();
    const Matrix& F = mm.F;
    GradFilterState out;
    out.dx.resize(p);
    out.dV.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        out.dx[j] = F * gs.dx[j];
        Matrix dV = F * gs.dV[j] * F.transpose() + gsx.dNoise[j];
        if (gsx.has_dF[j]) {
            out.dx[j] += mm.dF[j] * gs.base.x;
            const Matrix dFVFt = mm.dF[j] * gs.base.V * F.transpose();
            dV += dFVFt + dFVFt.transpose();
        }
        out.dV[j] = symmetrized(dV);
    }
    out.base = predict(gs.base, F, gsx.GQGt);
    return out;
}

} // namespace detail

GradFilterState grad_predict(const GradFilterState& gs, const ModelMatrices& mm) {
    return detail::grad_predict(gs, mm, detail::GradientStructure(mm));
}

GradUpdateResult grad_update(const GradFilterState& predicted, const ModelMatrices& mm, double y,
                             std::size_t step) {
    const auto p = predicted.dx.size();
    auto base = update(predicted.base, mm, y, step);
    const Vector& x = predicted.base.x;
    const Matrix& V = predicted.base.V;
    const double r = base.innovation.r;
    const double eps = base.innovation.eps;
    const Vector& K = base.innovation.gain;
    const Vector VHt = V * mm.H.transpose();
    const RowVector HV = mm.H * V;

    GradUpdateResult out;
    out.grad.deps.resize(static_cast<Eigen::Index>(p));
    out.grad.dr.resize(static_cast<Eigen::Index>(p));
    out.grad.dgain.resize(p);
    out.state.dx.resize(p);
    out.state.dV.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const Vector& dx = predicted.dx[j];
        const Matrix& dV = predicted.dV[j];
        const RowVector& dH = mm.dH[j];

        const Vector dVHt = dV * mm.H.transpose();
        const double deps = -mm.H.dot(dx) - dH.dot(x);
        const double dr = mm.H.dot(dVHt) + dH.dot(VHt) + HV.dot(dH) + mm.dR[j];
        Vector dK = (dVHt + V * dH.transpose()) / r - VHt * (dr / (r * r));

        out.state.dx[j] = dx + K * deps + dK * eps;
        Matrix dVn = dV - dK * HV - K * (mm.H * dV);
        if (!dH.isZero(0.0)) dVn -= K * (dH * V);
        out.state.dV[j] = symmetrized(dVn);

        out.grad.deps(jj) = deps;
        out.grad.dr(jj) = dr;
        out.grad.dgain[j] = std::move(dK);
    }
    out.state.base = std::move(base.state);
    out.innovation = std::move(base.innovation);
    return out;
}

LikelihoodReport run_gradient_filter(const StateSpaceModel& model, std::span<const double> y,
                                     bool concentrated) {
    detail::check_series(y);
    const auto& mm = model.matrices;
    check_first_derivatives(mm, model.initial);
    detail::count_filter_pass();
    const detail::GradientStructure gsx(mm);

    LikelihoodReport report;
    report.innovations.reserve(y.size());
    report.grad_innovations.reserve(y.size());
    detail::LikelihoodAccumulator acc;
    auto state = GradFilterState::from_initial(model.initial);
    for (std::size_t n = 0; n < y.size(); ++n) {
        auto upd = grad_update(detail::grad_predict(state, mm, gsx), mm, y[n], n);
        state = std::move(upd.state);
        acc.add(upd.innovation);
        report.innovations.push_back(std::move(upd.innovation));
        report.grad_innovations.push_back(std::move(upd.grad));
    }
    acc.finish(report, concentrated);
    report.gradient = concentrated ? concentrated_gradient(report.innovations,
                                                           report.grad_innovations,
                                                           *report.sigma2_hat)
                                   : gradient_from_innovations(report.innovations,
                                                               report.grad_innovations);
    return report;
}

LikelihoodReport run_gradient_filter(const ModelProvider& provider, const Vector& theta,
                                     std::span<const double> y) {
    const auto model = provider.evaluate(theta, DerivativeOrder::first);
    return run_gradient_filter(model, y, provider.concentrated_variance());
}

namespace {

// Per-parameter sums of dr/r, eps*deps/r and eps^2*dr/r^2.
struct ScoreSums {
    std::vector<CompensatedSum> dr_over_r, eps_deps_over_r, eps2_dr_over_r2;

    ScoreSums(std::span<const InnovationRecord> innovations, std::span<const GradInnovation> grads) {
        if (innovations.size() != grads.size() || grads.empty())
            throw BadDimension("innovation and derivative records differ in length");
        const auto p = static_cast<std::size_t>(grads.front().dr.size());
        dr_over_r.resize(p);
        eps_deps_over_r.resize(p);
        eps2_dr_over_r2.resize(p);
        for (std::size_t n = 0; n < innovations.size(); ++n) {
            const double r = innovations[n].r, e = innovations[n].eps;
            for (std::size_t j = 0; j < p; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                dr_over_r[j] += grads[n].dr(jj) / r;
                eps_deps_over_r[j] += e * grads[n].deps(jj) / r;
                eps2_dr_over_r2[j] += e * e * grads[n].dr(jj) / (r * r);
            }
        }
    }
};

} // namespace

Vector gradient_from_innovations(std::span<const InnovationRecord> innovations,
                                 std::span<const GradInnovation> grads) {
    const ScoreSums s(innovations, grads);
    Vector g(static_cast<Eigen::Index>(s.dr_over_r.size()));
    for (std::size_t j = 0; j < s.dr_over_r.size(); ++j)
        g(static_cast<Eigen::Index>(j)) =
            -0.5 * (s.dr_over_r[j].value() + 2.0 * s.eps_deps_over_r[j].value() -
                    s.eps2_dr_over_r2[j].value());
    return g;
}

Vector concentrated_gradient(std::span<const InnovationRecord> innovations,
                             std::span<const GradInnovation> grads, double sigma2_hat) {
    const ScoreSums s(innovations, grads);
    Vector g(static_cast<Eigen::Index>(s.dr_over_r.size()));
    for (std::size_t j = 0; j < s.dr_over_r.size(); ++j)
        g(static_cast<Eigen::Index>(j)) = -0.5 * s.dr_over_r[j].value() -
                                          s.eps_deps_over_r[j].value() / sigma2_hat +
                                          s.eps2_dr_over_r2[j].value() / (2.0 * sigma2_hat);
    return g;
}

} // namespace ssmgrad
