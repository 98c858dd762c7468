#pragma once

// Small dense helpers shared by every module. Everything here works on
// Eigen dynamic matrices; the phase count m is expected to be small.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "qbd/errors.hpp"

namespace qbd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kMachineEps = std::numeric_limits<double>::epsilon();

/// Infinity norm (max absolute row sum). Zero for empty matrices.
template <typename Derived>
double norm_inf(const Eigen::MatrixBase<Derived>& a)
{
    if (a.size() == 0) return 0.0;
    return a.cwiseAbs().rowwise().sum().maxCoeff();
}

inline Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

inline Vector ones(Eigen::Index n) { return Vector::Ones(n); }

/// a^k for k >= 0 by repeated squaring.
inline Matrix matrix_power(const Matrix& a, int k)
{
    Matrix result = identity(a.rows());
    Matrix base = a;
    while (k > 0) {
        if (k & 1) result = result * base;
        k >>= 1;
        if (k > 0) base = base * base;
    }
    return result;
}

inline std::vector<Complex> eigenvalues(const Matrix& a)
{
    if (a.rows() == 0) return {};
    Eigen::EigenSolver<Matrix> es(a, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
    std::vector<Complex> out(es.eigenvalues().data(), es.eigenvalues().data() + a.rows());
    return out;
}

inline double spectral_radius(const Matrix& a)
{
    double rho = 0.0;
    for (const auto& ev : eigenvalues(a)) rho = std::max(rho, std::abs(ev));
    return rho;
}

/// 2-norm condition number; infinity for exactly singular or empty-rank input.
inline double condition_number(const Matrix& a)
{
    if (a.rows() == 0) return 1.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

/// Solves a*x = b after checking the 2-norm condition number of a.
inline Matrix checked_solve(const Matrix& a, const Matrix& b, double max_cond, const char* what)
{
    const double cond = condition_number(a);
    if (!(cond < max_cond)) {
        throw NumericalError(std::string(what) + " is numerically singular (condition number " +
                             std::to_string(cond) + ")");
    }
    return a.partialPivLu().solve(b);
}

/// Unit-norm vector spanning the (numerical) right null space of a.
inline Vector null_vector(const Matrix& a)
{
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
    Vector v = svd.matrixV().col(a.cols() - 1);
    if (v.sum() < 0) v = -v;
    return v;
}

/// Stationary row vector of an irreducible stochastic matrix, summing to one.
inline Vector stationary_vector(const Matrix& p)
{
    const auto n = p.rows();
    Matrix a = (identity(n) - p).transpose();
    a.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) throw NumericalError("stationary vector is not unique (reducible matrix?)");
    return lu.solve(rhs);
}

/// Strong connectivity of the digraph with an edge i -> j whenever a(i,j) > 0.
inline bool strongly_connected(const Matrix& a)
{
    const auto n = a.rows();
    if (n == 0) return true;
    auto reach = [&](bool transpose) {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<Eigen::Index> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const auto i = stack.back();
            stack.pop_back();
            for (Eigen::Index j = 0; j < n; ++j) {
                const double w = transpose ? a(j, i) : a(i, j);
                if (w > 0.0 && !seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = 1;
                    stack.push_back(j);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    return reach(false) && reach(true);
}

} // namespace qbd
