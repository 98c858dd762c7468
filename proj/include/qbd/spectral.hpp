#pragma once

// Block-diagonal splitting of a square matrix into an invertible part V1
// and a nilpotent part V0:
//
//     target * M = M * diag(V1, V0),   M = [L | K],   M^-1 = [E; F].
//
// An ordered real Schur form puts the eigenvalues of modulus > eps_zero
// first; the trailing block is zeroed to strictly upper triangular and the
// off-diagonal coupling is removed with a Sylvester solve.

#include <lapacke.h>

#include <cmath>
#include <string>
#include <vector>

#include "qbd/linalg.hpp"

namespace qbd {

struct SpectralSplit {
    Matrix M, V1, V0, L, K, E, F;
    Eigen::Index p = 0;  ///< number of eigenvalues with modulus > eps_zero
    int nu = 1;          ///< smallest nu >= 1 with V0^nu = 0
    double eps_zero = 0.0;

    Eigen::Index m() const { return M.rows(); }

    /// L V1^k E + K V0^k F, which equals target^k.
    Matrix recompose_power(int k) const
    {
        Matrix out = L * matrix_power(V1, k) * E;
        if (K.cols() > 0) out += K * matrix_power(V0, k) * F;
        return out;
    }
};

/// m * eps * ||target||_inf.
inline double default_eps_zero(const Matrix& target)
{
    return static_cast<double>(target.rows()) * kMachineEps * std::max(norm_inf(target), 1e-300);
}

namespace detail {

inline thread_local double schur_select_threshold = 0.0;

inline lapack_logical select_nonzero(const double* wr, const double* wi)
{
    return std::hypot(*wr, *wi) > schur_select_threshold ? 1 : 0;
}

/// Smallest nu >= 1 with v0^nu = 0; entries below 1e-14 ||v0|| count as zero.
inline int nilpotency_index(const Matrix& v0)
{
    if (v0.rows() == 0) return 1;
    const double cutoff = 1e-14 * std::max(norm_inf(v0), 1.0);
    Matrix power = v0;
    for (int nu = 1; nu <= v0.rows() + 1; ++nu) {
        if (power.cwiseAbs().maxCoeff() <= cutoff) return nu;
        power = power * v0;
    }
    throw NumericalError("nilpotent block is not nilpotent");
}

} // namespace detail

inline SpectralSplit split(const Matrix& target, double eps_zero = -1.0, double max_cond = 1e12)
{
    if (target.rows() != target.cols()) throw NumericalError("split target must be square");
    const auto m = target.rows();
    if (eps_zero < 0.0) eps_zero = default_eps_zero(target);

    // dgees, column-major in/out; T overwrites the copy.
    Matrix t = target;
    Matrix z(m, m);
    std::vector<double> wr(static_cast<std::size_t>(m)), wi(static_cast<std::size_t>(m));
    lapack_int sdim = 0;
    detail::schur_select_threshold = eps_zero;
    const lapack_int info =
        LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', &detail::select_nonzero, static_cast<lapack_int>(m), t.data(),
                      static_cast<lapack_int>(m), &sdim, wr.data(), wi.data(), z.data(), static_cast<lapack_int>(m));
    if (info != 0) {
        throw NumericalError("ordered Schur decomposition failed (info " + std::to_string(info) +
                             "); eigenvalues may straddle eps_zero, adjust it");
    }
    const Eigen::Index p = sdim;
    const Eigen::Index q = m - p;

    // Trailing block: eigenvalues of modulus <= eps_zero. Put the larger
    // off-diagonal entry of every 2x2 bump above the diagonal, then zero the
    // diagonal and subdiagonal so the block is exactly nilpotent.
    for (Eigen::Index i = p; i + 1 < m; ++i) {
        if (t(i + 1, i) != 0.0 && std::abs(t(i + 1, i)) > std::abs(t(i, i + 1))) {
            t.row(i).swap(t.row(i + 1));
            t.col(i).swap(t.col(i + 1));
            z.col(i).swap(z.col(i + 1));
        }
    }
    for (Eigen::Index i = p; i < m; ++i) {
        t(i, i) = 0.0;
        if (i + 1 < m) t(i + 1, i) = 0.0;
    }

    const Matrix t11 = t.topLeftCorner(p, p);
    const Matrix t12 = t.topRightCorner(p, q);
    const Matrix t22 = t.bottomRightCorner(q, q);
    const Matrix z1 = z.leftCols(p);
    const Matrix z2 = z.rightCols(q);

    // T11 Y - Y T22 = -T12 as a Kronecker system.
    Matrix y = Matrix::Zero(p, q);
    if (p > 0 && q > 0) {
        Matrix sys = Matrix::Zero(p * q, p * q);
        for (Eigen::Index c = 0; c < q; ++c) {
            sys.block(c * p, c * p, p, p) += t11;
            for (Eigen::Index r = 0; r < q; ++r) {
                sys.block(c * p, r * p, p, p) -= t22(r, c) * identity(p);
            }
        }
        const Vector sv = Eigen::JacobiSVD<Matrix>(sys).singularValues();
        const double cond = sv(0) / sv(sv.size() - 1);
        const double sep = sv(sv.size() - 1);
        if (!(cond < max_cond) || !(sep * max_cond > norm_inf(t))) {
            throw NumericalError("failed to decouple the spectral blocks (Sylvester condition number " +
                                 std::to_string(cond) + "); eigenvalues straddle eps_zero, adjust it");
        }
        const Vector rhs = -Eigen::Map<const Vector>(t12.data(), p * q);
        const Vector sol = sys.fullPivLu().solve(rhs);
        y = Eigen::Map<const Matrix>(sol.data(), p, q);
    }

    SpectralSplit s;
    s.p = p;
    s.eps_zero = eps_zero;
    s.V1 = t11;
    s.V0 = t22;
    s.L = z1;
    s.K = z1 * y + z2;
    s.E = z1.transpose() - y * z2.transpose();
    s.F = z2.transpose();
    s.M.resize(m, m);
    s.M.leftCols(p) = s.L;
    s.M.rightCols(q) = s.K;
    s.nu = detail::nilpotency_index(s.V0);
    return s;
}

} // namespace qbd
