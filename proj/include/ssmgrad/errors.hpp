#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssmgrad {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BadDimension : public Error {
public:
    using Error::Error;
};

// Innovation variance r_n fell to or below the floor at filter step `step` (0-based).
class NonpositiveInnovationVariance : public Error {
public:
    NonpositiveInnovationVariance(std::size_t step, double r)
        : Error("innovation variance r=" + std::to_string(r) + " is not positive at step " +
                std::to_string(step)),
          step_(step), r_(r) {}

    std::size_t step() const { return step_; }
    double variance() const { return r_; }

private:
    std::size_t step_;
    double r_;
};

class MissingSecondDerivatives : public Error {
public:
    MissingSecondDerivatives() : Error("model provides no second-derivative stacks") {}
};

class NonStationary : public Error {
public:
    using Error::Error;
};

class SingularCovarianceSystem : public Error {
public:
    using Error::Error;
};

class DegenerateVariance : public Error {
public:
    using Error::Error;
};

// A finite-difference probe produced a non-finite value or threw.
class ProbeFailure : public Error {
public:
    ProbeFailure(const std::string& what, Eigen::VectorXd point)
        : Error(what), point_(std::move(point)) {}
    const Eigen::VectorXd& point() const { return point_; }

private:
    Eigen::VectorXd point_;
};

class EvaluationFailure : public Error {
public:
    EvaluationFailure(const std::string& what, Eigen::VectorXd theta)
        : Error(what), theta_(std::move(theta)) {}
    const Eigen::VectorXd& theta() const { return theta_; }

private:
    Eigen::VectorXd theta_;
};

class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace ssmgrad
