#pragma once

// Quadratic matrix equations of the QBD: G, Ghat, R, Rhat, the auxiliary
// U, Uhat, the drift-based classification, the characteristic roots and
// the boundary stationary vector.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qbd/linalg.hpp"
#include "qbd/model.hpp"

namespace qbd {

enum class ChainClass { PositiveRecurrent, NullRecurrent, Transient };

inline const char* to_string(ChainClass c)
{
    switch (c) {
    case ChainClass::PositiveRecurrent: return "PositiveRecurrent";
    case ChainClass::NullRecurrent: return "NullRecurrent";
    case ChainClass::Transient: return "Transient";
    }
    return "?";
}

struct QmeOptions {
    double tol = 1e-10;        ///< residual acceptance for every quadratic equation
    int max_iter = 200;        ///< logarithmic-reduction doubling steps
    double null_band = 1e-9;   ///< |drift| <= null_band classifies as null recurrent
    double max_cond = 1e14;    ///< condition bound for I - U and I - Uhat
};

/// Residual ||A_low + (A_mid - I) X + A_high X^2||_inf.
inline double qme_residual(const Matrix& a_low, const Matrix& a_mid, const Matrix& a_high, const Matrix& x)
{
    const auto m = x.rows();
    return norm_inf(a_low + (a_mid - identity(m)) * x + a_high * x * x);
}

/// Residual of the "left" form ||A_low + X (A_mid - I) + X^2 A_high||_inf used by R and Rhat.
inline double qme_left_residual(const Matrix& a_low, const Matrix& a_mid, const Matrix& a_high, const Matrix& x)
{
    const auto m = x.rows();
    return norm_inf(a_low + x * (a_mid - identity(m)) + x * x * a_high);
}

namespace detail {

/// Logarithmic reduction for A_low + (A_mid - I) X + A_high X^2 = 0. Each
/// step doubles the number of levels covered.
inline Matrix logarithmic_reduction(const Matrix& a_low, const Matrix& a_mid, const Matrix& a_high, int max_iter,
                                    int& steps)
{
    const auto m = a_mid.rows();
    const Matrix i_m = identity(m);
    Eigen::PartialPivLU<Matrix> mid_lu(i_m - a_mid);
    Matrix down = mid_lu.solve(a_low);
    Matrix up = mid_lu.solve(a_high);
    Matrix x = down;
    Matrix t = up;

    steps = 0;
    for (; steps < max_iter; ++steps) {
        const Matrix mix = up * down + down * up;
        Eigen::PartialPivLU<Matrix> lu(i_m - mix);
        const Matrix up_next = lu.solve(up * up);
        const Matrix down_next = lu.solve(down * down);
        up = up_next;
        down = down_next;
        const Matrix step = t * down;
        x += step;
        t = t * up;
        if (norm_inf(step) <= kMachineEps * std::max(1.0, norm_inf(x)) || norm_inf(t) == 0.0) break;
    }
    ++steps;
    return x;
}

} // namespace detail

/// Minimal nonnegative solution of A_low + (A_mid - I) X + A_high X^2 = 0.
///
/// When the solution is known to be stochastic (X 1 = 1), the unit
/// eigenvalue is first moved to zero with Q = 1 v^T, v = 1/m: the shifted
/// blocks A_low (I - Q), A_mid + A_high Q, A_high have the solution X - Q,
/// whose spectral radius is below one. This keeps quadratic convergence and
/// full accuracy at null recurrence, where the unshifted iteration only
/// reaches about sqrt(eps).
inline Matrix solve_qme(const Matrix& a_low, const Matrix& a_mid, const Matrix& a_high, double tol = 1e-10,
                        int max_iter = 200, bool stochastic = false)
{
    const auto m = a_mid.rows();
    int steps = 0;
    Matrix x;
    if (stochastic) {
        const Matrix q = Matrix::Constant(m, m, 1.0 / static_cast<double>(m));
        x = detail::logarithmic_reduction(a_low * (identity(m) - q), a_mid + a_high * q, a_high, max_iter, steps) + q;
    } else {
        x = detail::logarithmic_reduction(a_low, a_mid, a_high, max_iter, steps);
    }
    x = x.cwiseMax(0.0);
    const double res = qme_residual(a_low, a_mid, a_high, x);
    if (!(res <= tol)) {
        throw NumericalError("quadratic matrix equation did not converge after " + std::to_string(steps) +
                             " steps (residual " + std::to_string(res) + ")");
    }
    return x;
}

struct RuPair {
    Matrix U, R, Uhat, Rhat;
};

/// U = A0 + A1 G, R = A1 (I - U)^-1, Uhat = A0 + A_neg Ghat, Rhat = A_neg (I - Uhat)^-1.
inline RuPair compute_r_u(const QbdModel& model, const Matrix& g, const Matrix& ghat, const QmeOptions& opt = {})
{
    const auto m = model.phases();
    RuPair out;
    out.U = model.a0() + model.a1() * g;
    out.Uhat = model.a0() + model.a_minus() * ghat;
    // R (I - U) = A1  <=>  (I - U)^T R^T = A1^T
    out.R = checked_solve((identity(m) - out.U).transpose(), model.a1().transpose(), opt.max_cond, "I - U")
                .transpose();
    out.Rhat = checked_solve((identity(m) - out.Uhat).transpose(), model.a_minus().transpose(), opt.max_cond,
                             "I - Uhat")
                   .transpose();
    const double res = qme_left_residual(model.a_minus(), model.a0(), model.a1(), out.Rhat);
    if (!(res <= opt.tol)) {
        throw NumericalError("Rhat fails its defining equation (residual " + std::to_string(res) + ")");
    }
    return out;
}

struct QmeSolutions {
    Matrix G, Ghat, R, Rhat, U, Uhat;
    ChainClass classification = ChainClass::PositiveRecurrent;
    double drift = 0.0;
    double sp_G = 0.0, sp_Ghat = 0.0, sp_R = 0.0;
    std::vector<std::string> warnings;
};

struct ClassifyResult {
    ChainClass classification;
    double drift;
    std::vector<std::string> warnings;
};

/// Drift d = theta^T (A1 - A_neg) 1 with theta stationary for A_neg + A0 + A1.
inline double drift(const QbdModel& model)
{
    const Vector theta = stationary_vector(model.a_minus() + model.a0() + model.a1());
    return theta.dot((model.a1() - model.a_minus()) * ones(model.phases()));
}

/// Drift-based classification, cross-checked against the spectral radii of
/// G and Ghat when they are supplied (sp_G < 0 skips the check). The drift
/// verdict always wins; a disagreement is only a warning.
inline ClassifyResult classify(const QbdModel& model, double null_band = 1e-9, double sp_G = -1.0,
                               double sp_Ghat = -1.0, double band = 1e-8)
{
    ClassifyResult out{ChainClass::NullRecurrent, drift(model), {}};
    if (out.drift < -null_band) {
        out.classification = ChainClass::PositiveRecurrent;
    } else if (out.drift > null_band) {
        out.classification = ChainClass::Transient;
    }
    if (sp_G >= 0.0) {
        const bool g_unit = std::abs(sp_G - 1.0) <= band;
        const bool gh_unit = std::abs(sp_Ghat - 1.0) <= band;
        bool agrees = true;
        switch (out.classification) {
        case ChainClass::PositiveRecurrent: agrees = g_unit && !gh_unit; break;
        case ChainClass::Transient: agrees = !g_unit && gh_unit; break;
        case ChainClass::NullRecurrent: agrees = g_unit && gh_unit; break;
        }
        if (!agrees) {
            out.warnings.push_back(std::string("drift says ") + to_string(out.classification) +
                                   " but sp(G) = " + std::to_string(sp_G) + ", sp(Ghat) = " +
                                   std::to_string(sp_Ghat));
        }
    }
    return out;
}

/// Solves all four quadratic equations and classifies the chain.
inline QmeSolutions solve_all(const QbdModel& model, const QmeOptions& opt = {})
{
    QmeSolutions s;
    // G is stochastic for recurrent chains, Ghat for transient and null recurrent ones.
    const double d = drift(model);
    s.G = solve_qme(model.a_minus(), model.a0(), model.a1(), opt.tol, opt.max_iter, d <= opt.null_band);
    s.Ghat = solve_qme(model.a1(), model.a0(), model.a_minus(), opt.tol, opt.max_iter, d >= -opt.null_band);
    auto ru = compute_r_u(model, s.G, s.Ghat, opt);
    s.U = std::move(ru.U);
    s.R = std::move(ru.R);
    s.Uhat = std::move(ru.Uhat);
    s.Rhat = std::move(ru.Rhat);
    s.sp_G = spectral_radius(s.G);
    s.sp_Ghat = spectral_radius(s.Ghat);
    s.sp_R = spectral_radius(s.R);
    auto cls = classify(model, opt.null_band, s.sp_G, s.sp_Ghat);
    s.classification = cls.classification;
    s.drift = cls.drift;
    s.warnings = std::move(cls.warnings);
    return s;
}

/// Roots of det eta(lambda): eigenvalues of G followed by reciprocals of the
/// eigenvalues of Ghat (1/0 = infinity), sorted by modulus.
inline std::vector<Complex> char_roots(const QmeSolutions& s)
{
    std::vector<Complex> roots = eigenvalues(s.G);
    for (const auto& ev : eigenvalues(s.Ghat)) {
        if (ev == Complex(0.0, 0.0)) {
            roots.emplace_back(std::numeric_limits<double>::infinity(), 0.0);
        } else {
            roots.push_back(1.0 / ev);
        }
    }
    std::stable_sort(roots.begin(), roots.end(), [](const Complex& a, const Complex& b) {
        return std::abs(a) < std::abs(b);
    });
    return roots;
}

/// |xi_{m-1}| < xi_m <= 1 <= xi_{m+1} < |xi_{m+2}| within tol (strict
/// inequalities are checked with a margin of tol as well).
inline bool roots_interlace(const std::vector<Complex>& roots, Eigen::Index m, double tol = 1e-8)
{
    const auto mi = static_cast<std::size_t>(m);
    if (roots.size() != 2 * mi) return false;
    const Complex xm = roots[mi - 1];
    const Complex xm1 = roots[mi];
    if (std::abs(xm.imag()) > tol || std::abs(xm1.imag()) > tol) return false;
    if (xm.real() > 1.0 + tol || xm1.real() < 1.0 - tol) return false;
    if (mi >= 2 && !(std::abs(roots[mi - 2]) < xm.real() + tol)) return false;
    if (mi >= 2 && !(std::abs(roots[mi + 1]) > xm1.real() - tol)) return false;
    return true;
}

enum class Normalization { Probability, UnitSum };

struct StationaryData {
    Vector pi0;
    Normalization mode = Normalization::UnitSum;
    Matrix R;

    /// pi_i^T = pi_0^T R^i.
    Vector level(int i) const { return (pi0.transpose() * matrix_power(R, i)).transpose(); }
};

/// Left null vector of I - B - A1 G. Probability mode needs a positive
/// recurrent chain; UnitSum needs a recurrent chain (for a transient chain
/// I - B - A1 G is nonsingular and no such vector exists).
inline StationaryData stationary(const QbdModel& model, const QmeSolutions& s, Normalization mode)
{
    if (mode == Normalization::Probability && s.classification != ChainClass::PositiveRecurrent) {
        throw NumericalError(std::string("probability normalization requires a positive recurrent chain, got ") +
                             to_string(s.classification));
    }
    if (s.classification == ChainClass::Transient) {
        throw NumericalError("a transient chain has no boundary stationary vector (I - B - A1 G is nonsingular)");
    }
    const auto m = model.phases();
    const Matrix pstar = model.b() + model.a1() * s.G;
    Vector pi0 = stationary_vector(pstar);
    if (mode == Normalization::Probability) {
        const Vector w = (identity(m) - s.R).partialPivLu().solve(ones(m));
        pi0 /= pi0.dot(w);
    }
    return StationaryData{pi0, mode, s.R};
}

} // namespace qbd
