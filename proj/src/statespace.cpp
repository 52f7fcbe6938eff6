#include "ssmgrad/statespace.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ssmgrad {

namespace {

constexpr double kSymmetryTol = 1e-10;

double scale_of(const Matrix& a) { return std::max(1.0, a.cwiseAbs().maxCoeff()); }

bool is_symmetric(const Matrix& a) {
    if (a.rows() != a.cols()) return false;
    if (a.size() == 0) return true;
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * scale_of(a);
}

bool is_psd(const Matrix& a) {
    if (a.size() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -kSymmetryTol * scale_of(a);
}

std::string shape(Eigen::Index r, Eigen::Index c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

class Report {
public:
    void check_shape(const std::string& what, Eigen::Index r, Eigen::Index c, Eigen::Index er,
                     Eigen::Index ec) {
        if (r != er || c != ec)
            issues_.push_back(what + " has shape " + shape(r, c) + ", expected " + shape(er, ec));
    }
    void check_len(const std::string& what, std::size_t n, int p) {
        if (n != static_cast<std::size_t>(p))
            issues_.push_back("derivative stack length mismatch: " + what + " has " +
                              std::to_string(n) + " entries, expected " + std::to_string(p));
    }
    void add(std::string s) { issues_.push_back(std::move(s)); }
    std::vector<std::string> take() { return std::move(issues_); }

private:
    std::vector<std::string> issues_;
};

} // namespace

StructureSecondDerivatives StructureSecondDerivatives::zeros(const ModelDims& d) {
    const auto p = static_cast<std::size_t>(d.param_dim);
    return {PairStack<Matrix>(p, Matrix::Zero(d.state_dim, d.state_dim)),
            PairStack<Matrix>(p, Matrix::Zero(d.state_dim, d.noise_dim)),
            PairStack<RowVector>(p, RowVector::Zero(d.state_dim)),
            PairStack<Matrix>(p, Matrix::Zero(d.noise_dim, d.noise_dim)), PairStack<double>(p, 0.0)};
}

ModelMatrices ModelMatrices::zeros(const ModelDims& d) {
    const auto p = static_cast<std::size_t>(d.param_dim);
    ModelMatrices mm;
    mm.F = Matrix::Zero(d.state_dim, d.state_dim);
    mm.G = Matrix::Zero(d.state_dim, d.noise_dim);
    mm.H = RowVector::Zero(d.state_dim);
    mm.Q = Matrix::Zero(d.noise_dim, d.noise_dim);
    mm.R = 0.0;
    mm.dF.assign(p, mm.F);
    mm.dG.assign(p, mm.G);
    mm.dH.assign(p, mm.H);
    mm.dQ.assign(p, mm.Q);
    mm.dR.assign(p, 0.0);
    return mm;
}

InitialCondition InitialCondition::zeros(const ModelDims& d) {
    const auto p = static_cast<std::size_t>(d.param_dim);
    InitialCondition ic;
    ic.x0 = Vector::Zero(d.state_dim);
    ic.V0 = Matrix::Zero(d.state_dim, d.state_dim);
    ic.dx0.assign(p, ic.x0);
    ic.dV0.assign(p, ic.V0);
    return ic;
}

std::vector<std::string> ModelProvider::parameter_names() const {
    std::vector<std::string> names;
    for (int j = 0; j < param_dim(); ++j) names.push_back("theta" + std::to_string(j + 1));
    return names;
}

StructuralParams ModelProvider::structural(const Vector& theta) const {
    return {parameter_names(), theta, Matrix::Identity(theta.size(), theta.size())};
}

std::vector<std::string> validate_model(const ModelMatrices& mm, const InitialCondition& ic,
                                        const ModelDims& dims) {
    Report rep;
    const int m = dims.state_dim, k = dims.noise_dim, p = dims.param_dim;
    if (m < 1) rep.add("state_dim must be >= 1");
    if (k < 1) rep.add("noise_dim must be >= 1");
    if (p < 1) rep.add("param_dim must be >= 1");
    if (m < 1 || k < 1 || p < 1) return rep.take();

    rep.check_shape("F", mm.F.rows(), mm.F.cols(), m, m);
    rep.check_shape("G", mm.G.rows(), mm.G.cols(), m, k);
    rep.check_shape("H", mm.H.rows(), mm.H.cols(), 1, m);
    rep.check_shape("Q", mm.Q.rows(), mm.Q.cols(), k, k);
    if (mm.Q.rows() == k && mm.Q.cols() == k) {
        if (!is_symmetric(mm.Q))
            rep.add("Q not symmetric");
        else if (!is_psd(mm.Q))
            rep.add("Q not positive semidefinite");
    }
    if (!(mm.R >= 0.0) || !std::isfinite(mm.R)) rep.add("R must be finite and nonnegative");

    rep.check_len("dF", mm.dF.size(), p);
    rep.check_len("dG", mm.dG.size(), p);
    rep.check_len("dH", mm.dH.size(), p);
    rep.check_len("dQ", mm.dQ.size(), p);
    rep.check_len("dR", mm.dR.size(), p);
    for (std::size_t j = 0; j < mm.dF.size(); ++j)
        rep.check_shape("dF[" + std::to_string(j) + "]", mm.dF[j].rows(), mm.dF[j].cols(), m, m);
    for (std::size_t j = 0; j < mm.dG.size(); ++j)
        rep.check_shape("dG[" + std::to_string(j) + "]", mm.dG[j].rows(), mm.dG[j].cols(), m, k);
    for (std::size_t j = 0; j < mm.dH.size(); ++j)
        rep.check_shape("dH[" + std::to_string(j) + "]", mm.dH[j].rows(), mm.dH[j].cols(), 1, m);
    for (std::size_t j = 0; j < mm.dQ.size(); ++j) {
        rep.check_shape("dQ[" + std::to_string(j) + "]", mm.dQ[j].rows(), mm.dQ[j].cols(), k, k);
        if (mm.dQ[j].rows() == k && mm.dQ[j].cols() == k && !is_symmetric(mm.dQ[j]))
            rep.add("dQ[" + std::to_string(j) + "] not symmetric");
    }

    if (mm.second) {
        const auto& s = *mm.second;
        const auto pp = static_cast<std::size_t>(p);
        if (s.F.params() != pp || s.G.params() != pp || s.H.params() != pp || s.Q.params() != pp ||
            s.R.params() != pp) {
            rep.add("second-derivative pair stacks incomplete for param_dim " + std::to_string(p));
        } else {
            for (const auto& a : s.F) rep.check_shape("d2F", a.rows(), a.cols(), m, m);
            for (const auto& a : s.G) rep.check_shape("d2G", a.rows(), a.cols(), m, k);
            for (const auto& a : s.H) rep.check_shape("d2H", a.rows(), a.cols(), 1, m);
            for (const auto& a : s.Q) {
                rep.check_shape("d2Q", a.rows(), a.cols(), k, k);
                if (a.rows() == k && a.cols() == k && !is_symmetric(a)) rep.add("d2Q not symmetric");
            }
        }
    }

    rep.check_shape("x0", ic.x0.rows(), ic.x0.cols(), m, 1);
    rep.check_shape("V0", ic.V0.rows(), ic.V0.cols(), m, m);
    if (ic.V0.rows() == m && ic.V0.cols() == m) {
        if (!is_symmetric(ic.V0))
            rep.add("V0 not symmetric");
        else if (!is_psd(ic.V0))
            rep.add("V0 not positive semidefinite");
    }
    rep.check_len("dx0", ic.dx0.size(), p);
    rep.check_len("dV0", ic.dV0.size(), p);
    for (std::size_t j = 0; j < ic.dx0.size(); ++j)
        rep.check_shape("dx0[" + std::to_string(j) + "]", ic.dx0[j].rows(), ic.dx0[j].cols(), m, 1);
    for (std::size_t j = 0; j < ic.dV0.size(); ++j) {
        rep.check_shape("dV0[" + std::to_string(j) + "]", ic.dV0[j].rows(), ic.dV0[j].cols(), m, m);
        if (ic.dV0[j].rows() == m && ic.dV0[j].cols() == m && !is_symmetric(ic.dV0[j]))
            rep.add("dV0[" + std::to_string(j) + "] not symmetric");
    }
    const auto pp = static_cast<std::size_t>(p);
    if (ic.d2x0 && ic.d2x0->params() != pp) rep.add("d2x0 pair stack incomplete");
    if (ic.d2V0) {
        if (ic.d2V0->params() != pp) rep.add("d2V0 pair stack incomplete");
        for (const auto& a : *ic.d2V0)
            if (!is_symmetric(a)) rep.add("d2V0 entry not symmetric");
    }
    return rep.take();
}

Matrix psd_sqrt(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace ssmgrad
