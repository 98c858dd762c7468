#pragma once

#include <vector>

#include "qbd/qbd.hpp"

namespace qbd::testing {

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

inline QbdModel scalar_model(double b, double a_neg, double a0, double a1)
{
    return QbdModel(scalar(b), scalar(a_neg), scalar(a0), scalar(a1));
}

/// 0.6 / 0.2 / 0.2 down/stay/up, B = 0.8.
inline QbdModel pr1() { return scalar_model(0.8, 0.6, 0.2, 0.2); }
/// 0.2 / 0.2 / 0.6, B = 0.4.
inline QbdModel tr1() { return scalar_model(0.4, 0.2, 0.2, 0.6); }
/// 0.4 / 0.2 / 0.4, B = 0.6.
inline QbdModel nr1() { return scalar_model(0.6, 0.4, 0.2, 0.4); }

inline RhsSpec scalar_rhs(std::vector<double> values)
{
    std::vector<Vector> blocks;
    for (double v : values) blocks.push_back(Vector::Constant(1, v));
    return RhsSpec(std::move(blocks), 1);
}

/// Models for property tests: seed-driven, m cycles through 1..6.
inline Eigen::Index phases_for(int i) { return 1 + i % 6; }

/// g with g_0 adjusted so that sum_k pi0^T R^k g_k = 0.
inline RhsSpec project_rhs(const RhsSpec& g, const Vector& pi0, const Matrix& r)
{
    const double c = pi_dot_g(pi0, r, g).first;
    std::vector<Vector> blocks = g.blocks();
    blocks[0] -= (c / pi0.squaredNorm()) * pi0;
    return RhsSpec(std::move(blocks), pi0.size());
}

/// Residuals of the homogeneous equations for d (g = 0).
inline ResidualReport homogeneous_residuals(const QbdModel& model, const std::vector<Vector>& d, double tol)
{
    return residuals(model, RhsSpec({Vector::Zero(model.phases())}, model.phases()), d, tol);
}

inline std::vector<Vector> difference(const std::vector<Vector>& a, const std::vector<Vector>& b)
{
    std::vector<Vector> out;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) out.push_back(a[i] - b[i]);
    return out;
}

} // namespace qbd::testing

namespace qbd::testing {

/// Family whose Ghat has nilpotent Jordan blocks of size two: A1 is
/// supported on the subdiagonal and A0 is lower triangular, A_neg dense.
inline QbdModel nilpotent_model(std::uint64_t seed, Eigen::Index m)
{
    CounterRng rng(seed);
    Matrix an(m, m), a0 = Matrix::Zero(m, m), a1 = Matrix::Zero(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < m; ++c) {
            an(r, c) = rng.uniform();
            if (c <= r) a0(r, c) = rng.uniform();
        }
    }
    for (Eigen::Index r = 1; r < m; ++r) a1(r, r - 1) = 2.0 * rng.uniform();
    for (Eigen::Index r = 0; r < m; ++r) {
        const double s = an.row(r).sum() + a0.row(r).sum() + a1.row(r).sum();
        an.row(r) /= s;
        a0.row(r) /= s;
        a1.row(r) /= s;
    }
    return QbdModel(an + a0, an, a0, a1);
}

} // namespace qbd::testing
