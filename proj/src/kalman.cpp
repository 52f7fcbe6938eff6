#include "ssmgrad/kalman.hpp"

#include "ssmgrad/errors.hpp"

#include <cmath>

namespace ssmgrad {

namespace {
thread_local std::uint64_t tl_filter_passes = 0;
constexpr long double kLog2Pi = 1.8378770664093454835606594728112L;
} // namespace

std::uint64_t filter_passes_on_this_thread() { return tl_filter_passes; }

namespace detail {

void count_filter_pass() { ++tl_filter_passes; }

void check_series(std::span<const double> y) {
    if (y.empty()) throw BadDimension("series must contain at least one observation");
}

FilterState predict(const FilterState& state, const Matrix& F, const Matrix& GQGt) {
    FilterState out;
    out.x = F * state.x;
    Matrix V = F * state.V * F.transpose() + GQGt;
    out.V = 0.5 * (V + V.transpose());
    return out;
}

void LikelihoodAccumulator::add(const InnovationRecord& rec) {
    ++n_;
    log_r_ += std::log(rec.r);
    e2_over_r_ += rec.eps * rec.eps / rec.r;
}

void LikelihoodAccumulator::finish(LikelihoodReport& report, bool concentrated) const {
    const auto n = static_cast<long double>(n_);
    report.n_obs = n_;
    if (concentrated) {
        const long double s2 = e2_over_r_.extended() / n;
        if (!(s2 > 0.0L) || !std::isfinite(s2))
            throw DegenerateVariance("concentrated innovation variance is not positive");
        report.sigma2_hat = static_cast<double>(s2);
        report.loglik_extended = -0.5L * (n * kLog2Pi + n * std::log(s2) + log_r_.extended() + n);
    } else {
        report.loglik_extended = -0.5L * (n * kLog2Pi + log_r_.extended() + e2_over_r_.extended());
    }
    report.loglik = static_cast<double>(report.loglik_extended);
}

} // namespace detail

FilterState predict(const FilterState& state, const ModelMatrices& mm) {
    return detail::predict(state, mm.F, mm.G * mm.Q * mm.G.transpose());
}

UpdateResult update(const FilterState& predicted, const ModelMatrices& mm, double y,
                    std::size_t step) {
    const Vector VHt = predicted.V * mm.H.transpose();
    const double r = mm.H.dot(VHt) + mm.R;
    if (!(r > kMinInnovationVariance)) throw NonpositiveInnovationVariance(step, r);

    UpdateResult out;
    auto& rec = out.innovation;
    rec.eps = y - mm.H.dot(predicted.x);
    rec.r = r;
    rec.gain = VHt / r;

    out.state.x = predicted.x + rec.gain * rec.eps;
    Matrix V = predicted.V - rec.gain * (mm.H * predicted.V);
    out.state.V = 0.5 * (V + V.transpose());
    return out;
}

LikelihoodReport run_filter(const StateSpaceModel& model, std::span<const double> y,
                            bool concentrated) {
    detail::check_series(y);
    detail::count_filter_pass();
    const auto& mm = model.matrices;
    const Matrix GQGt = mm.G * mm.Q * mm.G.transpose();

    LikelihoodReport report;
    report.innovations.reserve(y.size());
    detail::LikelihoodAccumulator acc;
    FilterState state{model.initial.x0, model.initial.V0};
    for (std::size_t n = 0; n < y.size(); ++n) {
        auto upd = update(detail::predict(state, mm.F, GQGt), mm, y[n], n);
        state = std::move(upd.state);
        acc.add(upd.innovation);
        report.innovations.push_back(std::move(upd.innovation));
    }
    acc.finish(report, concentrated);
    return report;
}

LikelihoodReport run_filter(const ModelProvider& provider, const Vector& theta,
                            std::span<const double> y) {
    const auto model = provider.evaluate(theta, DerivativeOrder::none);
    return run_filter(model, y, provider.concentrated_variance());
}

ConcentratedLikelihood concentrated_loglik(std::span<const InnovationRecord> innovations) {
    if (innovations.empty()) throw BadDimension("no innovations to concentrate");
    detail::LikelihoodAccumulator acc;
    for (const auto& rec : innovations) acc.add(rec);
    LikelihoodReport tmp;
    acc.finish(tmp, true);
    return {*tmp.sigma2_hat, tmp.loglik};
}

} // namespace ssmgrad
