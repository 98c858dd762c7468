#pragma once

// General solution of (I - P) u = g for positive recurrent and transient
// QBDs:
//
//     u_r = G^r x + L V1^-r y + sigma_r,
//
// with sigma_r the particular solution of the level equations and (x, y)
// tied together by the boundary equation at level 0.

#include <optional>
#include <string>
#include <vector>

#include "qbd/linalg.hpp"
#include "qbd/model.hpp"
#include "qbd/qme.hpp"
#include "qbd/spectral.hpp"
#include "qbd/triple.hpp"
#include "qbd/verify.hpp"

namespace qbd {

/// Ingredients of the general solution of the level equations: the
/// minimal solution G (or its shifted counterpart), the split of the dual
/// solution and W. V1^-1 is cached because negative powers are used often.
struct DifferenceFactors {
    Matrix G;
    SpectralSplit split;
    Matrix W;
    Matrix V1_inv;

    DifferenceFactors(Matrix g, SpectralSplit s, Matrix w)
        : G(std::move(g)), split(std::move(s)), W(std::move(w))
    {
        const auto p = split.p;
        V1_inv = p > 0 ? checked_solve(split.V1, identity(p), 1e14, "V1") : Matrix(0, 0);
    }

    Eigen::Index m() const { return G.rows(); }
    Eigen::Index p() const { return split.p; }
};

namespace detail {

/// -sum_{j=1}^{nu-1} K V0^j F W g_{j+r}
inline Vector nilpotent_tail(const DifferenceFactors& f, const RhsSpec& g, int r)
{
    Vector out = Vector::Zero(f.m());
    const auto& s = f.split;
    if (s.K.cols() == 0) return out;
    Matrix v0_pow = s.V0;
    for (int j = 1; j <= s.nu - 1; ++j) {
        out -= s.K * (v0_pow * (s.F * (f.W * g.at(j + r))));
        v0_pow = v0_pow * s.V0;
    }
    return out;
}

/// -sum_{k=0}^{r-1} G^k W g_{r-k}
inline Vector g_convolution(const DifferenceFactors& f, const RhsSpec& g, int r)
{
    Vector out = Vector::Zero(f.m());
    Matrix gk = identity(f.m());
    for (int k = 0; k <= r - 1; ++k) {
        out -= gk * (f.W * g.at(r - k));
        gk = gk * f.G;
    }
    return out;
}

} // namespace detail

/// Particular solution sigma_r of A_neg u_r + (A0 - I) u_{r+1} + A1 u_{r+2} = -g_{r+1}:
///
///     sigma_r = -sum_{k=1}^{r} (G^{r-k} - L V1^{k-r} E) W g_k - sum_{j=1}^{nu-1} K V0^j F W g_{j+r}
///
/// evaluated as -sum_{k<r} G^k W g_{r-k} + L V1^-r sum_{k<=r} V1^k E W g_k + tail.
inline Vector compute_sigma(const DifferenceFactors& f, const RhsSpec& g, int r)
{
    Vector out = detail::g_convolution(f, g, r) + detail::nilpotent_tail(f, g, r);
    if (f.p() > 0 && r >= 1) {
        // sum_{k=1}^{r} V1^{k-r} E W g_k, accumulated Horner-style in V1^-1
        Vector acc = Vector::Zero(f.p());
        for (int k = 1; k <= r; ++k) acc = f.V1_inv * acc + f.split.E * (f.W * g.at(k));
        out += f.split.L * acc;
    }
    return out;
}

/// y* = -sum_{k=1}^{N} V1^k E W g_k.
inline Vector compute_y_star(const DifferenceFactors& f, const RhsSpec& g)
{
    Vector out = Vector::Zero(f.p());
    if (f.p() == 0) return out;
    Matrix v1k = f.split.V1;
    for (int k = 1; k <= g.support(); ++k) {
        out -= v1k * (f.split.E * (f.W * g.at(k)));
        v1k = v1k * f.split.V1;
    }
    return out;
}

/// u_r = G^r x - sum_{k=0}^{r-1} G^k W g_{r-k} + L V1^-r (y + sum_{k=1}^{r} V1^k E W g_k)
///       - sum_{j=1}^{nu-1} K V0^j F W g_{j+r}.
inline Vector evaluate_u(const DifferenceFactors& f, const Vector& x, const Vector& y, const RhsSpec& g, int r)
{
    Vector out = matrix_power(f.G, r) * x + detail::g_convolution(f, g, r) + detail::nilpotent_tail(f, g, r);
    if (f.p() > 0) {
        Vector inner = y;
        Matrix v1k = f.split.V1;
        for (int k = 1; k <= r; ++k) {
            inner += v1k * (f.split.E * (f.W * g.at(k)));
            v1k = v1k * f.split.V1;
        }
        out += f.split.L * (matrix_power(f.V1_inv, r) * inner);
    }
    return out;
}

/// u_r = G^r x + L V1^-r y + sigma_r, the unregrouped form.
inline Vector evaluate_u_direct(const DifferenceFactors& f, const Vector& x, const Vector& y, const RhsSpec& g, int r)
{
    Vector out = matrix_power(f.G, r) * x + compute_sigma(f, g, r);
    if (f.p() > 0) out += f.split.L * (matrix_power(f.V1_inv, r) * y);
    return out;
}

/// Same value as evaluate_u with y = y* + y_offset, but with the V1 part
/// written as L V1^-r y_offset - L sum_{k>r} V1^{k-r} E W g_k, so nothing
/// cancels when y = y* (the bounded representative).
inline std::vector<Vector> evaluate_sequence(const DifferenceFactors& f, const Vector& x, const Vector& y_offset,
                                             const RhsSpec& g, int levels)
{
    std::vector<Vector> u;
    u.reserve(static_cast<std::size_t>(levels) + 1);
    Vector gx = x;
    Vector free_part = y_offset;
    for (int r = 0; r <= levels; ++r) {
        Vector ur = gx + detail::g_convolution(f, g, r) + detail::nilpotent_tail(f, g, r);
        if (f.p() > 0) {
            Vector tail = Vector::Zero(f.p());
            Matrix v1k = f.split.V1;
            for (int k = r + 1; k <= g.support(); ++k) {
                tail += v1k * (f.split.E * (f.W * g.at(k)));
                v1k = v1k * f.split.V1;
            }
            ur += f.split.L * (free_part - tail);
            free_part = f.V1_inv * free_part;
        }
        u.push_back(std::move(ur));
        gx = f.G * gx;
    }
    return u;
}

struct GroupInverseData {
    Matrix Pstar;
    Matrix sharp;
    Vector pi_star;       ///< stationary vector of P* (empty when P* is strictly substochastic)
    bool stochastic = false;
};

/// Group inverse of I - P*. For stochastic P*: (I - P* + 1 pi^T)^-1 - 1 pi^T;
/// otherwise (I - P*)^-1.
inline GroupInverseData group_inverse(const Matrix& pstar, bool stochastic)
{
    const auto m = pstar.rows();
    GroupInverseData out;
    out.Pstar = pstar;
    out.stochastic = stochastic;
    if (stochastic) {
        out.pi_star = stationary_vector(pstar);
        const Matrix one_pi = ones(m) * out.pi_star.transpose();
        out.sharp = checked_solve(identity(m) - pstar + one_pi, identity(m), 1e14,
                                  "fundamental matrix (reducible P*?)") -
                    one_pi;
    } else {
        out.sharp = checked_solve(identity(m) - pstar, identity(m), 1e14, "I - P*");
    }
    return out;
}

/// Stochasticity decided from the row sums of P* (tolerance 1e-9).
inline GroupInverseData group_inverse(const Matrix& pstar)
{
    const double dev = (pstar.rowwise().sum() - ones(pstar.rows())).cwiseAbs().maxCoeff();
    return group_inverse(pstar, dev <= 1e-9);
}

enum class YPerpMode { MinimalNorm, Zero, Explicit };

struct PoissonOptions {
    YPerpMode y_perp_mode = YPerpMode::MinimalNorm;
    Vector y_perp;                ///< used when y_perp_mode == Explicit
    std::optional<Vector> y_free; ///< transient: the free vector y (default y*)
    double alpha = 0.0;
    int levels = -1;              ///< horizon R_max; negative means N + 10
    double eps_zero = -1.0;       ///< split threshold; negative means the default
    double residual_tol = 1e-7;
    double constraint_tol = 1e-10;
    QmeOptions qme;
};

struct PoissonSolution {
    ChainClass classification = ChainClass::PositiveRecurrent;
    Vector x, y, y_star, y_perp, sigma1;
    double alpha = 0.0;
    double pi_g = 0.0;            ///< pi^T g (recurrent chains)
    int levels = 0;
    Eigen::Index p = 0;
    int nu = 1;
    std::vector<Vector> u;
    ResidualReport residuals;
    std::vector<std::string> warnings;
};

/// pi^T g = sum_{k<=N} pi0^T R^k g_k, and the same sum with absolute values
/// (the scale against which "pi^T g = 0" is judged).
inline std::pair<double, double> pi_dot_g(const Vector& pi0, const Matrix& r, const RhsSpec& g)
{
    double value = 0.0, scale = 0.0;
    Vector pik = pi0;
    for (int k = 0; k <= g.support(); ++k) {
        value += pik.dot(g.at(k));
        scale += pik.cwiseAbs().dot(g.at(k).cwiseAbs());
        pik = (pik.transpose() * r).transpose();
    }
    return {value, scale};
}

namespace detail {

/// Solves v^T y = c for the requested mode; v = 0 with c != 0 is infeasible.
inline Vector constrained_offset(const Vector& v, double c, double c_scale, const PoissonOptions& opt)
{
    const double c_tol = opt.constraint_tol * std::max(c_scale, 1e-300);
    switch (opt.y_perp_mode) {
    case YPerpMode::Explicit: {
        if (opt.y_perp.size() != v.size()) {
            throw ValidationError("explicit y_perp has length " + std::to_string(opt.y_perp.size()) + ", expected " +
                                  std::to_string(v.size()));
        }
        const double miss = std::abs(v.dot(opt.y_perp) - c);
        if (miss > c_tol + opt.constraint_tol * v.norm() * opt.y_perp.norm()) {
            throw InfeasibleError("explicit y_perp violates the hyperplane constraint (residual " +
                                  std::to_string(miss) + ")");
        }
        return opt.y_perp;
    }
    case YPerpMode::Zero:
        if (std::abs(c) > c_tol) {
            throw InfeasibleError("y_perp = 0 requires pi^T g = 0, got " + std::to_string(c));
        }
        return Vector::Zero(v.size());
    case YPerpMode::MinimalNorm:
        break;
    }
    if (std::abs(c) <= c_tol) return Vector::Zero(v.size());
    const double vv = v.squaredNorm();
    if (vv == 0.0 || v.norm() <= 1e-13) {
        if (std::abs(c) > c_tol) {
            throw InfeasibleError("constraint on y_perp is infeasible: its normal vector vanishes while pi^T g = " +
                                  std::to_string(c));
        }
        return Vector::Zero(v.size());
    }
    return (c / vv) * v;
}

} // namespace detail

inline int default_levels(const RhsSpec& g) { return g.support() + 10; }

/// Builds the factors (G, split of Ghat, W) for a chain that is not null recurrent.
inline DifferenceFactors make_factors(const QmeSolutions& q, double eps_zero = -1.0)
{
    auto rd = compute_w(q.G, q.U, q.R, q.Ghat);
    return DifferenceFactors(q.G, split(q.Ghat, eps_zero), rd.W);
}

/// General solution for a positive recurrent or transient chain.
inline PoissonSolution solve_poisson(const QbdModel& model, const RhsSpec& g, const QmeSolutions& q,
                                     const PoissonOptions& opt = {})
{
    if (q.classification == ChainClass::NullRecurrent) {
        throw NumericalError("solve_poisson needs a positive recurrent or transient chain; use the shift path");
    }
    const auto m = model.phases();
    const DifferenceFactors f = make_factors(q, opt.eps_zero);
    PoissonSolution sol;
    sol.classification = q.classification;
    sol.p = f.p();
    sol.nu = f.split.nu;
    sol.levels = opt.levels >= 0 ? opt.levels : default_levels(g);
    sol.warnings = q.warnings;
    sol.y_star = compute_y_star(f, g);
    sol.sigma1 = compute_sigma(f, g, 1);

    const Matrix coupling = (model.b() - identity(m)) * q.Ghat + model.a1();
    const Matrix pstar = model.b() + model.a1() * q.G;

    Vector offset;
    if (q.classification == ChainClass::Transient) {
        if (opt.y_free) {
            if (opt.y_free->size() != f.p()) {
                throw ValidationError("y_free has length " + std::to_string(opt.y_free->size()) + ", expected " +
                                      std::to_string(f.p()));
            }
            sol.y = *opt.y_free;
        } else {
            sol.y = sol.y_star;
        }
        offset = sol.y - sol.y_star;
        sol.y_perp = offset;
        const Vector rhs = coupling * (sol.sigma1 + f.split.L * (f.V1_inv * sol.y)) + g.at(0);
        sol.x = group_inverse(pstar, false).sharp * rhs;
        sol.alpha = 0.0;
    } else {
        const auto st = stationary(model, q, Normalization::Probability);
        const auto [c, c_scale] = pi_dot_g(st.pi0, q.R, g);
        sol.pi_g = c;
        // pi0^T W^-1 L y_perp = pi^T g, W^-1 = (I - U)(G Ghat - I)
        const Matrix w_inv = (identity(m) - q.U) * (q.G * q.Ghat - identity(m));
        const Vector v = (st.pi0.transpose() * w_inv * f.split.L).transpose();
        offset = detail::constrained_offset(v, c, c_scale, opt);
        sol.y_perp = offset;
        sol.y = sol.y_star + offset;
        const Vector rhs = coupling * (sol.sigma1 + f.split.L * (f.V1_inv * sol.y)) + g.at(0);
        sol.alpha = opt.alpha;
        sol.x = group_inverse(pstar, true).sharp * rhs + opt.alpha * ones(m);
    }
    sol.u = evaluate_sequence(f, sol.x, offset, g, std::max(sol.levels, 2));
    sol.residuals = residuals(model, g, sol.u, opt.residual_tol);
    return sol;
}

inline PoissonSolution solve_poisson(const QbdModel& model, const RhsSpec& g, const PoissonOptions& opt = {})
{
    return solve_poisson(model, g, solve_all(model, opt.qme), opt);
}

/// Variant for nonsingular A1, where L = E = I, V1 = Ghat and
/// u_r = G^r x + W R^-r y~ - sum_{k=1}^{r} (G^{r-k} W - W R^{k-r}) g_k.
/// The free vector is y~ = W^-1 y; y_free and y_perp refer to y~ here.
inline PoissonSolution solve_nonsingular_a1(const QbdModel& model, const RhsSpec& g, const QmeSolutions& q,
                                            const PoissonOptions& opt = {})
{
    const auto m = model.phases();
    if (!(condition_number(model.a1()) < 1e12)) throw NumericalError("A1 is singular");
    if (q.classification == ChainClass::NullRecurrent) {
        throw NumericalError("the nonsingular-A1 formula needs a chain that is not null recurrent");
    }
    const Matrix w = compute_w(q.G, q.U, q.R, q.Ghat).W;
    const Matrix r_inv = checked_solve(q.R, identity(m), 1e14, "R");
    const Matrix pstar = model.b() + model.a1() * q.G;

    PoissonSolution sol;
    sol.classification = q.classification;
    sol.p = m;
    sol.nu = 1;
    sol.levels = opt.levels >= 0 ? opt.levels : default_levels(g);
    sol.warnings = q.warnings;
    // y~* = -sum_{k>=1} R^k g_k
    sol.y_star = Vector::Zero(m);
    {
        Matrix rk = q.R;
        for (int k = 1; k <= g.support(); ++k) {
            sol.y_star -= rk * g.at(k);
            rk = rk * q.R;
        }
    }
    sol.sigma1 = Vector::Zero(m);

    Vector offset;
    bool stochastic = false;
    if (q.classification == ChainClass::Transient) {
        sol.y = opt.y_free ? *opt.y_free : sol.y_star;
        if (sol.y.size() != m) throw ValidationError("y_free must have length m");
        offset = sol.y - sol.y_star;
    } else {
        stochastic = true;
        const auto st = stationary(model, q, Normalization::Probability);
        const auto [c, c_scale] = pi_dot_g(st.pi0, q.R, g);
        sol.pi_g = c;
        offset = detail::constrained_offset(st.pi0, c, c_scale, opt);
        sol.y = sol.y_star + offset;
        sol.alpha = opt.alpha;
    }
    sol.y_perp = offset;
    const Vector rhs = (model.b() - identity(m)) * (w * sol.y) + model.a1() * (w * (r_inv * sol.y)) + g.at(0);
    sol.x = group_inverse(pstar, stochastic).sharp * rhs + sol.alpha * ones(m);

    // u_r = G^r x - sum_{k<r} G^k W g_{r-k} + W R^-r y~_offset - W sum_{k>r} R^{k-r} g_k
    const int levels = std::max(sol.levels, 2);
    Vector gx = sol.x;
    Vector free_part = offset;
    for (int r = 0; r <= levels; ++r) {
        Vector ur = gx + w * free_part;
        Matrix gk = identity(m);
        for (int k = 0; k <= r - 1; ++k) {
            ur -= gk * (w * g.at(r - k));
            gk = gk * q.G;
        }
        Matrix rk = q.R;
        for (int k = r + 1; k <= g.support(); ++k) {
            ur -= w * (rk * g.at(k));
            rk = rk * q.R;
        }
        sol.u.push_back(std::move(ur));
        gx = q.G * gx;
        free_part = r_inv * free_part;
    }
    sol.residuals = residuals(model, g, sol.u, opt.residual_tol);
    return sol;
}

inline PoissonSolution solve_nonsingular_a1(const QbdModel& model, const RhsSpec& g, const PoissonOptions& opt = {})
{
    if (!(condition_number(model.a1()) < 1e12)) throw NumericalError("A1 is singular");
    return solve_nonsingular_a1(model, g, solve_all(model, opt.qme), opt);
}

} // namespace qbd
