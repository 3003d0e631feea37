#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace imflow {

template <int D> using Vec = Eigen::Matrix<double, D, 1>;
template <int D> using Mat = Eigen::Matrix<double, D, D>;
using Vec2 = Vec<2>;
using Mat2 = Mat<2>;
using VectorXd = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Error kinds map onto CLI exit codes: invalid input -> 2, numerical -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class InvalidArgument : public Error {
public:
    using Error::Error;
};
class NotFound : public Error {
public:
    using Error::Error;
};
class Unsupported : public Error {
public:
    using Error::Error;
};
class Infeasible : public Error {
public:
    using Error::Error;
};
class NumericalFailure : public Error {
public:
    using Error::Error;
};
class IoError : public Error {
public:
    using Error::Error;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Hoelder conjugate r' = r/(r-1).
inline double conjugate_exponent(double r)
{
    if (!(r > 1.0))
        throw InvalidArgument("growth exponent must exceed 1, got " + std::to_string(r));
    return r / (r - 1.0);
}

// Pressure integrability exponent min{r', r*/2} with the Sobolev exponent
// r* = dr/(d-r) for r < d and r* = inf otherwise.
inline double pressure_exponent(int d, double r)
{
    const double rc = conjugate_exponent(r);
    if (r >= d)
        return rc;
    const double rstar = d * r / (d - r);
    return std::min(rc, 0.5 * rstar);
}

template <int D> double frobenius(const Mat<D>& a) { return std::sqrt((a.array() * a.array()).sum()); }
template <int D> double contract(const Mat<D>& a, const Mat<D>& b) { return (a.array() * b.array()).sum(); }
template <int D> Mat<D> sym(const Mat<D>& a) { return 0.5 * (a + a.transpose()); }

} // namespace imflow
