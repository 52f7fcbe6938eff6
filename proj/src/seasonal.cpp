#include "ssmgrad/seasonal.hpp"

#include "ssmgrad/errors.hpp"
#include "ssmgrad/parcor.hpp"

#include <cmath>

namespace ssmgrad {

namespace {

using Index = Eigen::Index;

// Starting point of the reference fits: log variances then AR PARCOR coordinates.
constexpr double kTau1 = -12.20607265;
constexpr double kTau2 = -13.81551056;
constexpr double kTau3 = -9.72116600;
constexpr double kSigma = -0.69314718;
constexpr double kAlpha[] = {2.92316158, -1.20485737};

} // namespace

void SeasonalSpec::validate() const {
    if (period < 2) throw BadDimension("seasonal period must be >= 2");
    if (ar_order < 0) throw BadDimension("AR order must be >= 0");
    if (!(parcor_bound > 0.0 && parcor_bound <= 1.0))
        throw BadDimension("PARCOR bound must lie in (0, 1]");
    if (!(diffuse_variance > 0.0)) throw BadDimension("diffuse variance must be positive");
}

StateSpaceModel build_seasonal(const SeasonalSpec& spec, const Vector& theta,
                               DerivativeOrder order) {
    spec.validate();
    if (theta.size() != spec.param_dim())
        throw BadDimension("seasonal model expects " + std::to_string(spec.param_dim()) +
                           " parameters, got " + std::to_string(theta.size()));

    const ModelDims dims{spec.state_dim(), spec.noise_dim(), spec.param_dim()};
    const int m = dims.state_dim;
    const int ps = spec.period - 1;
    const int a0 = spec.ar_offset();
    const int m3 = spec.ar_order;
    const int nv = spec.ar_order > 0 ? 3 : 2;
    const int is2 = spec.sigma2_index();

    StateSpaceModel model;
    model.dims = dims;
    auto& mm = model.matrices;
    if (order == DerivativeOrder::none) {
        mm.F = Matrix::Zero(m, m);
        mm.G = Matrix::Zero(m, dims.noise_dim);
        mm.H = RowVector::Zero(m);
        mm.Q = Matrix::Zero(dims.noise_dim, dims.noise_dim);
    } else {
        mm = ModelMatrices::zeros(dims);
    }

    mm.F(0, 0) = 2.0;
    mm.F(0, 1) = -1.0;
    mm.F(1, 0) = 1.0;
    for (int i = 0; i < ps; ++i) mm.F(2, 2 + i) = -1.0;
    for (int i = 1; i < ps; ++i) mm.F(2 + i, 1 + i) = 1.0;
    for (int i = 1; i < m3; ++i) mm.F(a0 + i, a0 + i - 1) = 1.0;

    mm.G(0, 0) = 1.0;
    mm.G(2, 1) = 1.0;
    mm.H(0) = 1.0;
    mm.H(2) = 1.0;
    if (m3 > 0) {
        mm.G(a0, 2) = 1.0;
        mm.H(a0) = 1.0;
    }

    Vector variances(nv);
    for (int j = 0; j < nv; ++j) variances(j) = std::exp(theta(j));
    mm.Q = variances.asDiagonal();
    mm.R = std::exp(theta(is2));

    ParcorChain chain;
    if (m3 > 0) {
        chain = parcor_chain(theta.tail(m3), spec.parcor_bound, order == DerivativeOrder::second);
        mm.F.block(a0, a0, 1, m3) = chain.coefficients.transpose();
    }

    auto& ic = model.initial;
    if (order == DerivativeOrder::none) {
        ic.x0 = Vector::Zero(m);
        ic.V0 = spec.diffuse_variance * Matrix::Identity(m, m);
        return model;
    }
    ic = InitialCondition::zeros(dims);
    ic.V0 = spec.diffuse_variance * Matrix::Identity(m, m);

    // d/d log(v) of v is v, for each variance.
    for (int j = 0; j < nv; ++j) mm.dQ[static_cast<std::size_t>(j)](j, j) = variances(j);
    mm.dR[static_cast<std::size_t>(is2)] = mm.R;
    for (int i = 0; i < m3; ++i)
        mm.dF[static_cast<std::size_t>(4 + i)].block(a0, a0, 1, m3) =
            chain.jacobian.col(i).transpose();

    if (order == DerivativeOrder::second) {
        auto s = StructureSecondDerivatives::zeros(dims);
        for (int j = 0; j < nv; ++j) s.Q(j, j) = mm.dQ[static_cast<std::size_t>(j)];
        s.R(is2, is2) = mm.R;
        for (int i = 0; i < m3; ++i)
            for (int l = i; l < m3; ++l)
                for (int c = 0; c < m3; ++c)
                    s.F(4 + i, 4 + l)(a0, a0 + c) = chain.hessian[static_cast<std::size_t>(c)](i, l);
        mm.second = std::move(s);
        const auto p = static_cast<std::size_t>(dims.param_dim);
        ic.d2x0 = PairStack<Vector>(p, Vector::Zero(m));
        ic.d2V0 = PairStack<Matrix>(p, Matrix::Zero(m, m));
    }
    return model;
}

Vector default_seasonal_theta(const SeasonalSpec& spec) {
    Vector theta = Vector::Zero(spec.param_dim());
    theta(0) = kTau1;
    theta(1) = kTau2;
    if (spec.ar_order > 0) {
        theta(2) = kTau3;
        theta(3) = kSigma;
        for (int i = 0; i < spec.ar_order && i < 2; ++i) theta(4 + i) = kAlpha[i];
    } else {
        theta(2) = kSigma;
    }
    return theta;
}

SeasonalModel::SeasonalModel(SeasonalSpec spec) : spec_(spec) { spec_.validate(); }

std::string SeasonalModel::name() const {
    std::string s = spec_.ar_order > 0 ? "seasonal-ar" : "seasonal";
    s += "(period=" + std::to_string(spec_.period);
    if (spec_.ar_order > 0) s += ", ar_order=" + std::to_string(spec_.ar_order);
    return s + ")";
}

std::vector<std::string> SeasonalModel::parameter_names() const {
    std::vector<std::string> names{"log_tau1sq", "log_tau2sq"};
    if (spec_.ar_order > 0) names.emplace_back("log_tau3sq");
    names.emplace_back("log_sigma2");
    for (int i = 1; i <= spec_.ar_order; ++i) names.push_back("alpha" + std::to_string(i));
    return names;
}

StructuralParams SeasonalModel::structural(const Vector& theta) const {
    if (theta.size() != spec_.param_dim()) throw BadDimension("theta length mismatch");
    const Index p = theta.size();
    const int nv = spec_.ar_order > 0 ? 4 : 3;
    StructuralParams out;
    out.names = {"tau1sq", "tau2sq"};
    if (spec_.ar_order > 0) out.names.emplace_back("tau3sq");
    out.names.emplace_back("sigma2");
    for (int i = 1; i <= spec_.ar_order; ++i) out.names.push_back("a" + std::to_string(i));
    out.values.resize(p);
    out.jacobian = Matrix::Zero(p, p);
    for (int j = 0; j < nv; ++j) {
        out.values(j) = std::exp(theta(j));
        out.jacobian(j, j) = out.values(j);
    }
    if (spec_.ar_order > 0) {
        const auto chain = parcor_chain(theta.tail(spec_.ar_order), spec_.parcor_bound);
        out.values.tail(spec_.ar_order) = chain.coefficients;
        out.jacobian.bottomRightCorner(spec_.ar_order, spec_.ar_order) = chain.jacobian;
    }
    return out;
}

} // namespace ssmgrad
