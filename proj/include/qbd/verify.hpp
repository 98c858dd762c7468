#pragma once

// Independent checks: exact residuals of the level equations, the forward
// recurrence, and a seeded random-model generator for property tests.

#include <cstdint>
#include <string>
#include <vector>

#include "qbd/linalg.hpp"
#include "qbd/model.hpp"
#include "qbd/qme.hpp"

namespace qbd {

struct ResidualReport {
    double boundary_residual = 0.0;
    std::vector<double> interior_residuals;  ///< index r: level equation r (u_r, u_{r+1}, u_{r+2})
    double scale = 1.0;                      ///< 1 + max_r ||u_r||_inf
    double tol = 0.0;
    bool pass = false;

    double max_residual() const
    {
        double worst = boundary_residual;
        for (double r : interior_residuals) worst = std::max(worst, r);
        return worst;
    }
};

/// Boundary (B - I) u_0 + A1 u_1 + g_0 and interior
/// A_neg u_r + (A0 - I) u_{r+1} + A1 u_{r+2} + g_{r+1} for r = 0 .. len(u) - 3,
/// all in the infinity norm. pass <=> max residual <= tol * scale.
inline ResidualReport residuals(const QbdModel& model, const RhsSpec& g, const std::vector<Vector>& u, double tol)
{
    if (u.size() < 3) throw ValidationError("residual check needs at least three levels");
    const auto m = model.phases();
    const Matrix a0_i = model.a0() - identity(m);
    ResidualReport rep;
    rep.tol = tol;
    double umax = 0.0;
    for (const auto& v : u) umax = std::max(umax, v.cwiseAbs().maxCoeff());
    rep.scale = 1.0 + umax;
    rep.boundary_residual =
        ((model.b() - identity(m)) * u[0] + model.a1() * u[1] + g.at(0)).cwiseAbs().maxCoeff();
    for (std::size_t r = 0; r + 2 < u.size(); ++r) {
        const Vector res = model.a_minus() * u[r] + a0_i * u[r + 1] + model.a1() * u[r + 2] +
                           g.at(static_cast<int>(r) + 1);
        rep.interior_residuals.push_back(res.cwiseAbs().maxCoeff());
    }
    rep.pass = rep.max_residual() <= tol * rep.scale;
    return rep;
}

/// u_{r+2} = A1^-1 (-g_{r+1} - A_neg u_r - (A0 - I) u_{r+1}) from the seeds
/// u_0, u_1; returns u_0 .. u_levels. Amplifies growing modes, so only
/// meaningful over short horizons.
inline std::vector<Vector> forward_oracle(const QbdModel& model, const RhsSpec& g, const Vector& u0,
                                          const Vector& u1, int levels, double max_cond = 1e12)
{
    const auto m = model.phases();
    if (condition_number(model.a1()) >= max_cond) throw NumericalError("A1 is singular; forward recurrence undefined");
    Eigen::PartialPivLU<Matrix> a1_lu(model.a1());
    const Matrix a0_i = model.a0() - identity(m);
    std::vector<Vector> u{u0, u1};
    for (int r = 0; r + 2 <= levels; ++r) {
        const auto ri = static_cast<std::size_t>(r);
        u.push_back(a1_lu.solve(-g.at(r + 1) - model.a_minus() * u[ri] - a0_i * u[ri + 1]));
    }
    u.resize(static_cast<std::size_t>(std::max(levels, 1)) + 1);
    return u;
}

/// Counter-based stream: the k-th draw of a seed is a pure function of
/// (seed, k), so generated models are reproducible from the seed alone.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() { return mix(seed_ * 0x9E3779B97F4A7C15ULL + (++counter_) * 0xD1B54A32D192ED03ULL); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    static std::uint64_t mix(std::uint64_t z)
    {
        // splitmix64 finalizer
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

/// Seeded random QBD of the requested class.
///
/// Positive recurrent / transient: dense random blocks, rows normalized to
/// one; depending on the seed a column of A1 or of A_neg is zeroed first so
/// that singular blocks (and hence nilpotent parts of Ghat) are exercised.
/// If the drift has the wrong sign A1 and A_neg are swapped, which flips the
/// sign exactly; draws with |drift| < 0.02 are retried.
///
/// Null recurrent: A_neg dense with row sums in [0.1, 0.45], A1 = A_neg,
/// A0 = diagonal remainder. The drift is exactly zero.
///
/// B = A_neg + A0 in every case (reflecting boundary).
inline QbdModel random_model(std::uint64_t seed, Eigen::Index m, ChainClass target)
{
    if (m < 1) throw ValidationError("random_model needs m >= 1");
    CounterRng rng(seed * 1315423911ULL + static_cast<std::uint64_t>(m) * 2654435761ULL +
                   static_cast<std::uint64_t>(target));
    for (int attempt = 0; attempt < 100; ++attempt) {
        Matrix a_neg(m, m), a0(m, m), a1(m, m);
        if (target == ChainClass::NullRecurrent) {
            for (Eigen::Index i = 0; i < m; ++i) {
                for (Eigen::Index j = 0; j < m; ++j) a_neg(i, j) = rng.uniform(0.05, 1.0);
                a_neg.row(i) *= rng.uniform(0.1, 0.45) / a_neg.row(i).sum();
            }
            a1 = a_neg;
            a0 = Matrix::Zero(m, m);
            for (Eigen::Index i = 0; i < m; ++i) a0(i, i) = 1.0 - 2.0 * a_neg.row(i).sum();
        } else {
            for (Eigen::Index i = 0; i < m; ++i) {
                for (Eigen::Index j = 0; j < m; ++j) {
                    a_neg(i, j) = rng.uniform();
                    a0(i, j) = rng.uniform(0.05, 1.0);
                    a1(i, j) = rng.uniform();
                }
            }
            const double pick = rng.uniform();
            if (m >= 2 && pick < 0.3) {
                a1.col(static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(m))).setZero();
            } else if (m >= 2 && pick < 0.45) {
                a_neg.col(static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(m))).setZero();
            }
            for (Eigen::Index i = 0; i < m; ++i) {
                const double s = a_neg.row(i).sum() + a0.row(i).sum() + a1.row(i).sum();
                a_neg.row(i) /= s;
                a0.row(i) /= s;
                a1.row(i) /= s;
            }
        }
        QbdModel model(a_neg + a0, a_neg, a0, a1);
        if (target == ChainClass::NullRecurrent) return model;

        double d = drift(model);
        if (std::abs(d) < 0.02) continue;
        const bool want_negative = target == ChainClass::PositiveRecurrent;
        if ((d < 0) != want_negative) {
            model = QbdModel(a1 + a0, a1, a0, a_neg);
            d = -d;
        }
        if (classify(model).classification == target) return model;
    }
    throw NumericalError("random_model: generation failed for seed " + std::to_string(seed));
}

/// Seeded finitely supported right-hand side with support N in [0, max_support].
inline RhsSpec random_rhs(std::uint64_t seed, Eigen::Index m, int max_support = 4)
{
    CounterRng rng(seed * 40503ULL + 77ULL);
    const int n = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_support + 1));
    std::vector<Vector> blocks;
    for (int k = 0; k <= n; ++k) {
        Vector v(m);
        for (Eigen::Index i = 0; i < m; ++i) v(i) = rng.uniform(-1.0, 1.0);
        blocks.push_back(std::move(v));
    }
    return RhsSpec(std::move(blocks), m);
}

} // namespace qbd
