#include "cli.hpp"

#include "ssmgrad/arma.hpp"
#include "ssmgrad/errors.hpp"
#include "ssmgrad/hessian_filter.hpp"
#include "ssmgrad/kalman.hpp"
#include "ssmgrad/optimize.hpp"
#include "ssmgrad/seasonal.hpp"
#include "ssmgrad/series_io.hpp"
#include "ssmgrad/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace ssmgrad::cli {

namespace {

using Json = nlohmann::ordered_json;
using Index = Eigen::Index;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelOptions {
    std::string model = "seasonal";
    int period = 12;
    int ar_order = -1;  // -1: family default
    int ma_order = 0;
    double parcor_bound = 0.99;
    std::string parameterization = "transformed";
};

void add_model_options(CLI::App& cmd, ModelOptions& m) {
    cmd.add_option("--model", m.model, "Model family")
        ->check(CLI::IsMember({"seasonal", "seasonal-ar", "arma"}))
        ->capture_default_str();
    cmd.add_option("--period", m.period, "Seasonal period")->capture_default_str();
    cmd.add_option("--ar-order", m.ar_order, "AR order (seasonal-ar default 2, arma default 0)");
    cmd.add_option("--ma-order", m.ma_order, "MA order (arma)")->capture_default_str();
    cmd.add_option("--parcor-bound", m.parcor_bound, "Bound C on transformed PARCORs")
        ->capture_default_str();
    cmd.add_option("--parameterization", m.parameterization, "ARMA coordinates")
        ->check(CLI::IsMember({"transformed", "raw"}))
        ->capture_default_str();
}

struct ModelHandle {
    std::unique_ptr<ModelProvider> provider;
    Json descriptor;
    Vector default_theta;
    std::optional<SeasonalSpec> seasonal;
    std::optional<ArmaSpec> arma;
};

ModelHandle make_model(const ModelOptions& m) {
    ModelHandle h;
    h.descriptor["family"] = m.model;
    if (m.model == "arma") {
        ArmaSpec spec;
        spec.ar_order = m.ar_order < 0 ? 0 : m.ar_order;
        spec.ma_order = m.ma_order;
        spec.parcor_bound = m.parcor_bound;
        spec.parameterization = m.parameterization == "raw" ? ArmaParameterization::raw
                                                            : ArmaParameterization::transformed;
        h.provider = std::make_unique<ArmaModel>(spec);
        h.descriptor["ar_order"] = spec.ar_order;
        h.descriptor["ma_order"] = spec.ma_order;
        h.descriptor["parameterization"] = m.parameterization;
        h.descriptor["parcor_bound"] = spec.parcor_bound;
        h.default_theta = Vector::Zero(spec.param_dim());
        h.arma = spec;
    } else {
        SeasonalSpec spec;
        spec.period = m.period;
        spec.parcor_bound = m.parcor_bound;
        if (m.model == "seasonal-ar") {
            spec.ar_order = m.ar_order < 0 ? 2 : m.ar_order;
            if (spec.ar_order < 1) throw UsageError("seasonal-ar needs --ar-order >= 1");
        } else if (m.ar_order > 0) {
            throw UsageError("--ar-order requires --model seasonal-ar");
        }
        h.provider = std::make_unique<SeasonalModel>(spec);
        h.descriptor["period"] = spec.period;
        h.descriptor["ar_order"] = spec.ar_order;
        h.descriptor["parcor_bound"] = spec.parcor_bound;
        h.default_theta = default_seasonal_theta(spec);
        h.seasonal = spec;
    }
    h.descriptor["name"] = h.provider->name();
    h.descriptor["param_dim"] = h.provider->param_dim();
    h.descriptor["concentrated_variance"] = h.provider->concentrated_variance();
    return h;
}

Vector parse_theta(const std::string& text, const ModelHandle& h, const std::string& flag) {
    if (text.empty() || text == "default") return h.default_theta;
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(" \t");
        const auto last = item.find_last_not_of(" \t");
        const std::string field = first == std::string::npos ? "" : item.substr(first, last - first + 1);
        double v;
        const char* begin = field.data() + (!field.empty() && field[0] == '+' ? 1 : 0);
        const auto [ptr, ec] = std::from_chars(begin, field.data() + field.size(), v);
        if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size())
            throw UsageError(flag + ": not a number: '" + field + "'");
        values.push_back(v);
    }
    const int p = h.provider->param_dim();
    if (static_cast<int>(values.size()) != p)
        throw UsageError(flag + ": " + h.provider->name() + " expects " + std::to_string(p) +
                         " values, got " + std::to_string(values.size()));
    return Eigen::Map<const Vector>(values.data(), p);
}

Json to_json(const Vector& v) {
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Json to_json(const Matrix& m) {
    Json a = Json::array();
    for (Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
    return a;
}

Json to_json(const std::vector<std::string>& v) { return Json(v); }

Json to_json(const GradientCheck& check) {
    Json rows = Json::array();
    for (const auto& r : check.rows)
        rows.push_back({{"name", r.name},
                        {"analytic", r.analytic},
                        {"numerical", r.numerical},
                        {"abs_diff", r.abs_diff},
                        {"rel_diff", r.rel_diff},
                        {"digits", r.digits},
                        {"flagged", r.flagged}});
    return rows;
}

// Inverse of -H when it is positive definite, else NaN-filled.
Matrix covariance_from_hessian(const Matrix& hess) {
    const Matrix info = -0.5 * (hess + hess.transpose());
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        !(ldlt.vectorD().minCoeff() > 0.0))
        return Matrix::Constant(hess.rows(), hess.cols(), kNaN);
    return ldlt.solve(Matrix::Identity(hess.rows(), hess.cols()));
}

Vector standard_errors(const Matrix& cov) {
    Vector se(cov.rows());
    for (Index i = 0; i < cov.rows(); ++i) se(i) = cov(i, i) >= 0.0 ? std::sqrt(cov(i, i)) : kNaN;
    return se;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

void print_check_table(std::ostream& out, const GradientCheck& check) {
    out << std::left << std::setw(14) << "component" << std::right << std::setw(26)
        << "Numerical Difference" << std::setw(26) << "Gradient" << std::setw(8) << "digits"
        << '\n';
    for (const auto& r : check.rows) {
        out << std::left << std::setw(14) << r.name << std::right << std::setw(26) << fmt(r.numerical)
            << std::setw(26) << fmt(r.analytic) << std::setw(8) << std::fixed << std::setprecision(2)
            << r.digits << std::defaultfloat << (r.flagged ? "  !" : "") << '\n';
    }
}

struct FitOptions {
    ModelOptions model;
    std::string data;
    std::string init_theta = "default";
    std::string hessian = "auto";
    std::string gradient = "auto";
    bool json = false;
    double fd_constant = 1e-3;
    int max_iter = 200;
    double grad_tol = 1e-6;
};

int cmd_fit(const FitOptions& o, std::ostream& out) {
    const auto h = make_model(o.model);
    const Vector theta0 = parse_theta(o.init_theta, h, "--init-theta");
    const auto y = read_series(o.data);
    const auto& provider = *h.provider;

    HessianMethod hmethod = HessianMethod::automatic;
    if (o.hessian == "analytic") {
        if (!provider.has_second_derivatives())
            throw UsageError(provider.name() +
                             " has no analytic second derivatives; use --hessian fd");
        hmethod = HessianMethod::analytic;
    } else if (o.hessian == "fd") {
        hmethod = HessianMethod::finite_difference;
    }

    OptimizerConfig cfg;
    cfg.max_iter = o.max_iter;
    cfg.grad_tol = o.grad_tol;
    cfg.fd_constant = o.fd_constant;
    cfg.gradient = o.gradient == "fd"         ? GradientSource::finite_difference
                   : o.gradient == "analytic" ? GradientSource::analytic
                                              : GradientSource::automatic;
    const auto res = bfgs_maximize(provider, theta0, y, cfg);

    const auto final_report = run_filter(provider, res.theta_hat, y);
    std::optional<Matrix> hess;
    HessianSource hsource = HessianSource::none;
    if (o.hessian != "off") {
        const auto hr = run_hessian_filter(provider, res.theta_hat, y, hmethod);
        hess = *hr.hessian;
        hsource = hr.hessian_source;
    }
    const auto check = check_gradient(provider, res.theta_hat, y, o.fd_constant);
    const auto structural = provider.structural(res.theta_hat);
    const auto names = provider.parameter_names();
    const Index p = res.theta_hat.size();

    Vector se = Vector::Constant(p, kNaN), se_structural = Vector::Constant(p, kNaN);
    if (hess) {
        const Matrix cov = covariance_from_hessian(*hess);
        se = standard_errors(cov);
        se_structural = standard_errors(structural.jacobian * cov * structural.jacobian.transpose());
    }
    const char* hsource_name = hsource == HessianSource::analytic            ? "analytic"
                               : hsource == HessianSource::finite_difference ? "finite_difference"
                                                                              : "none";

    if (o.json) {
        Json j;
        j["model"] = h.descriptor;
        j["n_obs"] = y.size();
        j["converged"] = res.converged;
        j["message"] = res.message;
        j["n_iter"] = res.n_iter;
        j["loglik"] = res.loglik;
        j["aic"] = res.aic;
        j["sigma2_hat"] = final_report.sigma2_hat ? Json(*final_report.sigma2_hat) : Json(nullptr);
        j["theta"] = {{"names", to_json(names)},
                      {"values", to_json(res.theta_hat)},
                      {"standard_errors", to_json(se)}};
        j["structural"] = {{"names", to_json(structural.names)},
                           {"values", to_json(structural.values)},
                           {"standard_errors", to_json(se_structural)}};
        j["gradient"] = to_json(res.gradient);
        j["hessian_source"] = hsource_name;
        j["hessian"] = hess ? to_json(*hess) : Json(nullptr);
        Json log = Json::array();
        for (const auto& it : res.log)
            log.push_back({{"iter", it.iter},
                           {"loglik", it.loglik},
                           {"grad_norm", it.grad_norm},
                           {"step_length", it.step_length},
                           {"line_search_evals", it.line_search_evals}});
        j["iterations"] = log;
        j["gradient_check"] = to_json(check);
        j["evaluations"] = {{"value_evals", res.counts.value_evals},
                            {"gradient_evals", res.counts.gradient_evals},
                            {"filter_passes", res.counts.filter_passes}};
        out << j.dump(2) << '\n';
    } else {
        out << "model       " << provider.name() << '\n'
            << "n_obs       " << y.size() << '\n'
            << "converged   " << (res.converged ? "yes" : "no") << " (" << res.message << ")\n"
            << "iterations  " << res.n_iter << '\n'
            << "loglik      " << fmt(res.loglik) << '\n'
            << "aic         " << fmt(res.aic) << '\n';
        if (final_report.sigma2_hat) out << "sigma2_hat  " << fmt(*final_report.sigma2_hat) << '\n';
        out << "hessian     " << hsource_name << "\n\n";
        out << std::left << std::setw(14) << "parameter" << std::right << std::setw(26) << "estimate"
            << std::setw(26) << "std.error" << "   " << std::left << std::setw(10) << "structural"
            << std::right << std::setw(26) << "value" << std::setw(26) << "std.error" << '\n';
        for (Index i = 0; i < p; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            out << std::left << std::setw(14) << names[ui] << std::right << std::setw(26)
                << fmt(res.theta_hat(i)) << std::setw(26) << fmt(se(i)) << "   " << std::left
                << std::setw(10) << structural.names[ui] << std::right << std::setw(26)
                << fmt(structural.values(i)) << std::setw(26) << fmt(se_structural(i)) << '\n';
        }
        out << "\ngradient check at the estimate (C = " << fmt(o.fd_constant) << ")\n";
        print_check_table(out, check);
    }
    return res.converged ? 0 : 2;
}

struct CheckOptions {
    ModelOptions model;
    std::string data;
    std::string theta = "default";
    double fd_constant = 1e-3;
    bool json = false;
};

int cmd_check_grad(const CheckOptions& o, std::ostream& out) {
    const auto h = make_model(o.model);
    const Vector theta = parse_theta(o.theta, h, "--theta");
    const auto y = read_series(o.data);
    const auto check = check_gradient(*h.provider, theta, y, o.fd_constant);
    if (o.json) {
        Json j;
        j["model"] = h.descriptor;
        j["theta"] = to_json(theta);
        j["loglik"] = check.loglik;
        j["fd_constant"] = check.fd_constant;
        j["rows"] = to_json(check);
        out << j.dump(2) << '\n';
    } else {
        out << "model   " << h.provider->name() << '\n'
            << "loglik  " << fmt(check.loglik) << '\n'
            << "C       " << fmt(check.fd_constant) << "\n\n";
        print_check_table(out, check);
    }
    return 0;
}

struct SimulateOptions {
    ModelOptions model;
    std::string theta = "default";
    std::size_t n = 0;
    std::uint64_t seed = 1;
    double sigma2 = 1.0;
    std::string out_path;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
    const auto h = make_model(o.model);
    const Vector theta = parse_theta(o.theta, h, "--theta");
    if (!(o.sigma2 > 0.0)) throw UsageError("--sigma2 must be positive");
    const StateSpaceModel model = h.arma ? build_arma(*h.arma, theta, DerivativeOrder::none, o.sigma2)
                                         : build_seasonal(*h.seasonal, theta, DerivativeOrder::none);
    const auto sim = simulate(model, o.n, o.seed);
    if (o.out_path.empty())
        write_series(out, sim.y);
    else
        write_series(o.out_path, sim.y);
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Maximum-likelihood fitting of linear Gaussian state-space models", "ssmgrad"};
    app.require_subcommand(1);

    FitOptions fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model by BFGS on the exact log-likelihood");
    add_model_options(*fit_cmd, fit.model);
    fit_cmd->add_option("--data", fit.data, "Series file")->required();
    fit_cmd->add_option("--init-theta", fit.init_theta, "Comma list or 'default'")->capture_default_str();
    fit_cmd->add_option("--hessian", fit.hessian, "Hessian at the estimate")
        ->check(CLI::IsMember({"auto", "analytic", "fd", "off"}))
        ->capture_default_str();
    fit_cmd->add_option("--gradient", fit.gradient, "Gradient used by the optimizer")
        ->check(CLI::IsMember({"auto", "analytic", "fd"}))
        ->capture_default_str();
    fit_cmd->add_option("--fd-constant", fit.fd_constant, "Finite-difference constant C")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    fit_cmd->add_option("--max-iter", fit.max_iter, "Iteration limit")->capture_default_str();
    fit_cmd->add_option("--grad-tol", fit.grad_tol, "Gradient max-norm tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    fit_cmd->add_flag("--json", fit.json, "JSON report");

    CheckOptions check;
    auto* check_cmd = app.add_subcommand("check-grad", "Compare analytic and finite-difference gradients");
    add_model_options(*check_cmd, check.model);
    check_cmd->add_option("--data", check.data, "Series file")->required();
    check_cmd->add_option("--theta,--init-theta", check.theta, "Comma list or 'default'")
        ->capture_default_str();
    check_cmd->add_option("--fd-constant", check.fd_constant, "Finite-difference constant C")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    check_cmd->add_flag("--json", check.json, "JSON output");

    SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Draw a synthetic series from a model");
    add_model_options(*sim_cmd, sim.model);
    sim_cmd->add_option("--n", sim.n, "Series length")->required()->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    sim_cmd->add_option("--theta", sim.theta, "Comma list or 'default'")->capture_default_str();
    sim_cmd->add_option("--sigma2", sim.sigma2, "ARMA innovation variance")->capture_default_str();
    sim_cmd->add_option("--out", sim.out_path, "Output file (default: standard output)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit, out);
        if (*check_cmd) return cmd_check_grad(check, out);
        if (*sim_cmd) return cmd_simulate(sim, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace ssmgrad::cli
