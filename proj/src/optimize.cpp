#include "ssmgrad/optimize.hpp"

#include "ssmgrad/errors.hpp"
#include "ssmgrad/gradient_filter.hpp"
#include "ssmgrad/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ssmgrad {

namespace {

using Index = Eigen::Index;

constexpr double kInf = std::numeric_limits<double>::infinity();

using ExtendedObjective = std::function<long double(const Vector&, Vector&)>;

std::string describe(const Vector& v) {
    std::ostringstream os;
    os.precision(17);
    os << "(";
    for (Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
    os << ")";
    return os.str();
}

// One point on the search line, in minimization form phi(alpha) = -f(theta + alpha d).
struct Probe {
    double alpha = 0.0;
    long double phi = kInf;
    double dphi = 0.0;
    Vector theta;
    Vector grad;  // gradient of f
    bool ok = false;
};

class LineSearch {
public:
    LineSearch(const ExtendedObjective& f, const OptimizerConfig& cfg, const Vector& theta,
               const Vector& dir, const Probe& start)
        : f_(f), cfg_(cfg), theta_(theta), dir_(dir), start_(start) {}

    // Returns the accepted probe, or a probe with ok == false.
    Probe run(double alpha0) {
        Probe prev = start_;
        prev.alpha = 0.0;
        double alpha = alpha0;
        for (int i = 0; i < cfg_.max_line_search; ++i) {
            Probe cur = probe(alpha);
            if (!cur.ok || !sufficient(cur) || (i > 0 && cur.phi >= prev.phi))
                return zoom(prev, cur);
            if (std::abs(cur.dphi) <= -cfg_.c2 * start_.dphi) return cur;
            if (cur.dphi >= 0.0) return zoom(cur, prev);
            prev = cur;
            alpha *= 2.0;
        }
        return fallback();
    }

    int evaluations() const { return evals_; }

private:
    bool sufficient(const Probe& p) const {
        return p.ok && p.phi < start_.phi && p.phi <= start_.phi + cfg_.c1 * p.alpha * start_.dphi;
    }

    Probe probe(double alpha) {
        ++evals_;
        Probe p;
        p.alpha = alpha;
        p.theta = theta_ + alpha * dir_;
        try {
            const long double v = f_(p.theta, p.grad);
            if (std::isfinite(v) && p.grad.size() == dir_.size() && p.grad.allFinite()) {
                p.phi = -v;
                p.dphi = -p.grad.dot(dir_);
                p.ok = true;
            }
        } catch (const Error&) {
            p.ok = false;
        }
        if (sufficient(p) && (!best_.ok || p.phi < best_.phi)) best_ = p;
        if (p.ok && p.phi < start_.phi && p.dphi >= cfg_.c2 * start_.dphi &&
            p.dphi <= -0.8 * start_.dphi && (!flat_.ok || std::abs(p.dphi) < std::abs(flat_.dphi)))
            flat_ = p;
        return p;
    }

    Probe zoom(Probe lo, Probe hi) {
        for (int i = 0; i < cfg_.max_line_search; ++i) {
            const double a = std::min(lo.alpha, hi.alpha);
            const double b = std::max(lo.alpha, hi.alpha);
            const double width = b - a;
            if (width <= 1e-16 * std::max(1.0, b)) break;
            double trial = 0.5 * (lo.alpha + hi.alpha);
            if (hi.ok) {
                const double d = hi.alpha - lo.alpha;
                const double denom = hi.phi - lo.phi - lo.dphi * d;
                if (denom > 0.0) trial = lo.alpha - lo.dphi * d * d / (2.0 * denom);
            }
            trial = std::clamp(trial, a + 0.1 * width, b - 0.1 * width);
            Probe cur = probe(trial);
            if (!cur.ok || !sufficient(cur) || cur.phi >= lo.phi) {
                hi = cur;
            } else {
                if (std::abs(cur.dphi) <= -cfg_.c2 * start_.dphi) return cur;
                if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = cur;
            }
        }
        return fallback();
    }

    // When the predicted change in f is below its rounding noise, the Armijo
    // test carries no information; the directional derivative still does.
    Probe fallback() {
        for (int k = 1; !flat_.ok && k <= 12; ++k) probe(1.0 + 0.05 * ((k + 1) / 2) * (k % 2 ? 1 : -1));
        return flat_.ok ? flat_ : best_;
    }

    const ExtendedObjective& f_;
    const OptimizerConfig& cfg_;
    const Vector& theta_;
    const Vector& dir_;
    const Probe& start_;
    Probe best_;
    Probe flat_;
    int evals_ = 0;
};

} // namespace

void OptimizerConfig::validate() const {
    if (max_iter < 0) throw BadDimension("max_iter must be >= 0");
    if (!(grad_tol > 0.0) || !(step_tol > 0.0)) throw BadDimension("tolerances must be positive");
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0))
        throw BadDimension("line-search constants must satisfy 0 < c1 < c2 < 1");
    if (!(fd_constant > 0.0)) throw BadDimension("finite-difference constant must be positive");
    if (!(max_step > 0.0)) throw BadDimension("max_step must be positive");
    if (max_line_search < 1) throw BadDimension("max_line_search must be >= 1");
}

Vector fd_gradient(const ValueFunction& f, const Vector& theta, double C) {
    Vector grad(theta.size());
    auto eval = [&](const Vector& point) {
        double v;
        try {
            v = f(point);
        } catch (const std::exception& e) {
            throw ProbeFailure(std::string("probe evaluation failed: ") + e.what(), point);
        }
        if (!std::isfinite(v)) throw ProbeFailure("probe value is not finite", point);
        return v;
    };
    for (Index j = 0; j < theta.size(); ++j) {
        const double delta = C * std::max(std::abs(theta(j)), 1.0);
        Vector plus = theta, minus = theta;
        plus(j) += delta;
        minus(j) -= delta;
        grad(j) = (eval(plus) - eval(minus)) / (plus(j) - minus(j));
    }
    return grad;
}

LikelihoodObjective::LikelihoodObjective(const ModelProvider& provider, std::span<const double> y,
                                         GradientSource source, double fd_constant)
    : provider_(provider), y_(y.begin(), y.end()), source_(source), fd_constant_(fd_constant) {
    if (source_ == GradientSource::automatic) {
        const Vector probe = Vector::Zero(provider.param_dim());
        bool has_stacks = false;
        try {
            const auto model = provider.evaluate(probe, DerivativeOrder::first);
            has_stacks = model.matrices.dF.size() == static_cast<std::size_t>(provider.param_dim());
        } catch (const Error&) {
            has_stacks = true;
        }
        source_ = has_stacks ? GradientSource::analytic : GradientSource::finite_difference;
    }
}

double LikelihoodObjective::value(const Vector& theta) const {
    const auto before = filter_passes_on_this_thread();
    ++counts_.value_evals;
    const double v = run_filter(provider_, theta, y_).loglik;
    counts_.filter_passes += filter_passes_on_this_thread() - before;
    return v;
}

double LikelihoodObjective::value_and_gradient(const Vector& theta, Vector& grad) const {
    return static_cast<double>(value_and_gradient_extended(theta, grad));
}

long double LikelihoodObjective::value_and_gradient_extended(const Vector& theta, Vector& grad) const {
    const auto before = filter_passes_on_this_thread();
    ++counts_.gradient_evals;
    long double v;
    if (source_ == GradientSource::analytic) {
        auto report = run_gradient_filter(provider_, theta, y_);
        v = report.loglik_extended;
        grad = *report.gradient;
    } else {
        v = run_filter(provider_, theta, y_).loglik_extended;
        grad = fd_gradient([this](const Vector& t) { return run_filter(provider_, t, y_).loglik; },
                           theta, fd_constant_);
    }
    counts_.filter_passes += filter_passes_on_this_thread() - before;
    return v;
}

Vector fd_gradient(const ModelProvider& provider, const Vector& theta, std::span<const double> y,
                   double C) {
    return fd_gradient([&](const Vector& t) { return run_filter(provider, t, y).loglik; }, theta, C);
}

namespace {

OptimizeResult maximize(const ExtendedObjective& f, const Vector& theta0, const OptimizerConfig& cfg) {
    cfg.validate();
    const Index p = theta0.size();
    if (p == 0) throw BadDimension("nothing to optimize: empty parameter vector");

    Probe cur;
    cur.theta = theta0;
    try {
        const long double v = f(theta0, cur.grad);
        if (!std::isfinite(v) || !cur.grad.allFinite())
            throw EvaluationFailure("objective is not finite at the starting point", theta0);
        cur.phi = -v;
        cur.ok = true;
    } catch (const EvaluationFailure&) {
        throw;
    } catch (const Error& e) {
        throw EvaluationFailure(std::string("objective failed at the starting point: ") + e.what(),
                                theta0);
    }

    OptimizeResult res;
    auto record = [&](int iter, double step, int evals) {
        res.log.push_back({iter, static_cast<double>(-cur.phi), -cur.phi,
                           cur.grad.lpNorm<Eigen::Infinity>(), step, evals});
    };
    record(0, 0.0, 0);
    Matrix Hinv = Matrix::Identity(p, p);
    bool scaled = false;

    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        if (cur.grad.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) break;

        // Minimization of -f: descent direction -Hinv * (-grad).
        Vector dir = Hinv * cur.grad;
        cur.dphi = -cur.grad.dot(dir);
        if (!(cur.dphi < 0.0)) {
            Hinv.setIdentity();
            scaled = false;
            dir = cur.grad;
            cur.dphi = -cur.grad.squaredNorm();
        }

        auto search = [&](const Vector& d) {
            const double dn = d.lpNorm<Eigen::Infinity>();
            LineSearch ls(f, cfg, cur.theta, d, cur);
            Probe next = ls.run(std::min(1.0, cfg.max_step / dn));
            return std::make_pair(next, ls.evaluations());
        };
        auto [next, evals] = search(dir);
        if (!next.ok && !Hinv.isIdentity()) {
            Hinv.setIdentity();
            scaled = false;
            dir = cur.grad;
            cur.dphi = -cur.grad.squaredNorm();
            auto retry = search(dir);
            next = retry.first;
            evals += retry.second;
        }
        if (!next.ok) {
            res.line_search_failed = true;
            res.message = "line search found no point with sufficient increase";
            break;
        }

        const Vector s = next.theta - cur.theta;
        const Vector yv = cur.grad - next.grad;  // change in the gradient of -f
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            if (!scaled) {
                Hinv *= sy / yv.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Vector Hy = Hinv * yv;
            const double yHy = yv.dot(Hy);
            Hinv += (rho * rho * yHy + rho) * s * s.transpose() - rho * (Hy * s.transpose() + s * Hy.transpose());
            Hinv = 0.5 * (Hinv + Hinv.transpose()).eval();
        } else {
            Hinv.setIdentity();
            scaled = false;
        }

        cur = next;
        res.n_iter = iter;
        record(iter, s.lpNorm<Eigen::Infinity>(), evals);

        if (s.lpNorm<Eigen::Infinity>() <=
            cfg.step_tol * std::max(1.0, cur.theta.lpNorm<Eigen::Infinity>())) {
            res.message = "step below tolerance";
            break;
        }
    }

    res.theta_hat = cur.theta;
    res.loglik = static_cast<double>(-cur.phi);
    res.gradient = cur.grad;
    res.converged = cur.grad.lpNorm<Eigen::Infinity>() <= cfg.grad_tol;
    if (res.converged)
        res.message = "gradient below tolerance";
    else if (res.message.empty())
        res.message = "iteration limit reached";
    res.aic = aic(res.loglik, static_cast<int>(p), false);
    return res;
}

} // namespace

OptimizeResult bfgs_maximize(const ValueGradientFunction& f, const Vector& theta0,
                             const OptimizerConfig& cfg) {
    return maximize([&](const Vector& t, Vector& g) -> long double { return f(t, g); }, theta0, cfg);
}

OptimizeResult bfgs_maximize(const ModelProvider& provider, const Vector& theta0,
                             std::span<const double> y, const OptimizerConfig& cfg) {
    if (theta0.size() != provider.param_dim())
        throw BadDimension(provider.name() + " expects " + std::to_string(provider.param_dim()) +
                           " parameters, got " + std::to_string(theta0.size()));
    const LikelihoodObjective objective(provider, y, cfg.gradient, cfg.fd_constant);
    OptimizeResult res;
    try {
        res = maximize(
            [&](const Vector& t, Vector& g) { return objective.value_and_gradient_extended(t, g); },
            theta0, cfg);
    } catch (const EvaluationFailure& e) {
        throw EvaluationFailure(std::string(e.what()) + " theta=" + describe(e.theta()), e.theta());
    }
    res.aic = aic(res.loglik, provider.param_dim(), provider.concentrated_variance());
    res.counts = objective.counts();
    return res;
}

double aic(double loglik, int param_dim, bool concentrated_variance) {
    return -2.0 * loglik + 2.0 * (param_dim + (concentrated_variance ? 1 : 0));
}

double relative_difference(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0) return 0.0;
    return std::abs(a - b) / scale;
}

double agreement_digits(double a, double b) {
    const double rel = relative_difference(a, b);
    if (rel == 0.0) return 17.0;
    return std::clamp(-std::log10(rel), 0.0, 17.0);
}

GradientCheck check_gradient(const ModelProvider& provider, const Vector& theta,
                             std::span<const double> y, double C, double flag_digits) {
    const auto report = run_gradient_filter(provider, theta, y);
    const Vector numerical = fd_gradient(provider, theta, y, C);
    const auto names = provider.parameter_names();
    GradientCheck out;
    out.loglik = report.loglik;
    out.fd_constant = C;
    for (Index j = 0; j < theta.size(); ++j) {
        GradientCheckRow row;
        row.name = static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                               : "theta" + std::to_string(j + 1);
        row.analytic = (*report.gradient)(j);
        row.numerical = numerical(j);
        row.abs_diff = std::abs(row.analytic - row.numerical);
        row.rel_diff = relative_difference(row.analytic, row.numerical);
        row.digits = agreement_digits(row.analytic, row.numerical);
        row.flagged = row.digits < flag_digits;
        out.rows.push_back(std::move(row));
    }
    return out;
}

} // namespace ssmgrad
