#pragma once

#include "ssmgrad/pair_stack.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace ssmgrad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Dimensions of a scalar-observation state-space model.
struct ModelDims {
    int state_dim = 1;  // m
    int noise_dim = 1;  // k
    int param_dim = 1;  // p
};

/// Second partials of the structure matrices over parameter pairs (j <= k).
struct StructureSecondDerivatives {
    PairStack<Matrix> F;
    PairStack<Matrix> G;
    PairStack<RowVector> H;
    PairStack<Matrix> Q;
    PairStack<double> R;

    static StructureSecondDerivatives zeros(const ModelDims& dims);
};

/// Time-invariant structure of
///   x_n = F x_{n-1} + G v_n,  v_n ~ N(0, Q)
///   y_n = H x_n + w_n,        w_n ~ N(0, R)
/// together with the partial derivatives of every matrix with respect to theta.
struct ModelMatrices {
    Matrix F;
    Matrix G;
    RowVector H;
    Matrix Q;
    double R = 0.0;

    std::vector<Matrix> dF;
    std::vector<Matrix> dG;
    std::vector<RowVector> dH;
    std::vector<Matrix> dQ;
    std::vector<double> dR;

    std::optional<StructureSecondDerivatives> second;

    /// Zero-filled matrices and first-derivative stacks of the right shapes.
    static ModelMatrices zeros(const ModelDims& dims);
};

/// State mean and covariance before the first observation, with derivatives.
struct InitialCondition {
    Vector x0;
    Matrix V0;
    std::vector<Vector> dx0;
    std::vector<Matrix> dV0;
    std::optional<PairStack<Vector>> d2x0;
    std::optional<PairStack<Matrix>> d2V0;

    static InitialCondition zeros(const ModelDims& dims);
};

struct StateSpaceModel {
    ModelDims dims;
    ModelMatrices matrices;
    InitialCondition initial;
};

/// How much derivative information a provider evaluation should fill in.
enum class DerivativeOrder { none, first, second };

/// Parameters in the coordinates a user reads (variances, AR/MA coefficients),
/// with the Jacobian d(structural)/d(theta) for delta-method standard errors.
struct StructuralParams {
    std::vector<std::string> names;
    Vector values;
    Matrix jacobian;
};

/// Maps an unconstrained parameter vector to a fully specified model.
///
/// Implementations must be pure: the same theta gives bit-identical output.
class ModelProvider {
public:
    virtual ~ModelProvider() = default;

    virtual int param_dim() const = 0;
    virtual StateSpaceModel evaluate(const Vector& theta, DerivativeOrder order) const = 0;

    virtual bool has_second_derivatives() const { return false; }
    /// True when the innovation variance is profiled out of the likelihood.
    virtual bool concentrated_variance() const { return false; }

    virtual std::string name() const = 0;
    virtual std::vector<std::string> parameter_names() const;
    virtual StructuralParams structural(const Vector& theta) const;
};

/// Lists violated shape, symmetry and semidefiniteness constraints. Empty means valid.
std::vector<std::string> validate_model(const ModelMatrices& mm, const InitialCondition& ic,
                                        const ModelDims& dims);

inline std::vector<std::string> validate_model(const StateSpaceModel& model) {
    return validate_model(model.matrices, model.initial, model.dims);
}

/// Symmetric square root S with S S^T = A for a symmetric PSD A; negative
/// eigenvalues from roundoff are clipped to zero.
Matrix psd_sqrt(const Matrix& a);

} // namespace ssmgrad
