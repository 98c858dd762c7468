#pragma once

// Null recurrent chains. The rank-one right shift Q = w_G v^T moves the
// unit root of G to zero, after which the shifted level equations have the
// spectral gap the general construction needs:
//
//     At_neg = A_neg (I - Q),  At0 = A0 + A1 Q,  At1 = A1,
//     Gt = G - Q,  Gddot = Ghat + (w_G + Hhat^-1 w_Rhat) v^T.
//
// The solution u~ of the shifted equations is mapped back with
// u_0 = u~_0, u_k = u~_k + Q (u~_0 + ... + u~_{k-1}).

#include <string>
#include <vector>

#include "qbd/linalg.hpp"
#include "qbd/model.hpp"
#include "qbd/poisson.hpp"
#include "qbd/qme.hpp"
#include "qbd/spectral.hpp"
#include "qbd/triple.hpp"
#include "qbd/verify.hpp"

namespace qbd {

struct ShiftData {
    Vector w_G, v_Ghat, w_Rhat;
    Matrix Hhat;
    Matrix Q;
    Matrix At_neg, At0, At1;
    Matrix Gt, Gddot;
    Matrix Wt;
    SpectralSplit split_t;
    double normalization = 0.0;  ///< v^T Hhat^-1 w_Rhat before rescaling
};

/// Right eigenvector of a for the eigenvalue 1 (unit 2-norm, positive sum).
inline Vector unit_eigenvector(const Matrix& a) { return null_vector(a - identity(a.rows())); }

inline ShiftData right_shift(const QbdModel& model, const QmeSolutions& q, double eps_zero = -1.0)
{
    if (q.classification != ChainClass::NullRecurrent) {
        throw NumericalError(std::string("right shift needs a null recurrent chain, got ") +
                             to_string(q.classification));
    }
    const auto m = model.phases();
    const Matrix i_m = identity(m);
    ShiftData s;
    s.w_G = unit_eigenvector(q.G);
    s.v_Ghat = unit_eigenvector(q.Ghat.transpose());
    const double vw = s.v_Ghat.dot(s.w_G);
    if (std::abs(vw) < 1e-12) throw NumericalError("unit eigenvectors of G and Ghat are orthogonal");
    s.v_Ghat /= vw;

    s.Hhat = model.a0() - i_m + model.a_minus() * q.Ghat;
    s.w_Rhat = unit_eigenvector(q.Rhat);
    const Vector h_w = checked_solve(s.Hhat, s.w_Rhat, 1e14, "Hhat");
    s.normalization = s.v_Ghat.dot(h_w);
    if (std::abs(s.normalization) < 1e-12) {
        throw NumericalError("degenerate shift: v^T Hhat^-1 w_Rhat = " + std::to_string(s.normalization));
    }
    s.w_Rhat *= -1.0 / s.normalization;

    s.Q = s.w_G * s.v_Ghat.transpose();
    s.At_neg = model.a_minus() * (i_m - s.Q);
    s.At0 = model.a0() + model.a1() * s.Q;
    s.At1 = model.a1();
    s.Gt = q.G - s.Q;
    s.Gddot = q.Ghat + (s.w_G + checked_solve(s.Hhat, s.w_Rhat, 1e14, "Hhat")) * s.v_Ghat.transpose();

    const Matrix wt_inv = (i_m - q.U) * (s.Gt * s.Gddot - i_m);
    s.Wt = checked_solve(wt_inv, i_m, 1e14, "(I - U)(Gt Gddot - I)");
    s.split_t = split(s.Gddot, eps_zero);
    return s;
}

/// Residuals of the ShiftData invariants, in the same shape as the identity
/// report of the non-null-recurrent case.
inline IdentityReport shift_invariants(const QmeSolutions& q, const ShiftData& s, double tol = 1e-10)
{
    const auto m = s.Q.rows();
    const Matrix i_m = identity(m);
    IdentityReport rep;
    rep.checks.push_back({"shifted_g_equation", qme_residual(s.At_neg, s.At0, s.At1, s.Gt), tol});
    rep.checks.push_back({"shifted_ghat_equation", qme_residual(s.At1, s.At0, s.At_neg, s.Gddot), tol});
    rep.checks.push_back({"sp_Gt_below_one", std::max(0.0, spectral_radius(s.Gt) - (1.0 - 1e-6)), 0.0});
    rep.checks.push_back({"sp_Gddot_is_one", std::abs(spectral_radius(s.Gddot) - 1.0), 1e-8});
    rep.checks.push_back(
        {"shifted_w_inverse", norm_inf(s.Wt * ((i_m - q.U) * (s.Gt * s.Gddot - i_m)) - i_m), tol});
    return rep;
}

/// General solution in the null recurrent case via the right shift.
inline PoissonSolution solve_null_recurrent(const QbdModel& model, const RhsSpec& g, const QmeSolutions& q,
                                            const PoissonOptions& opt = {})
{
    if (q.classification != ChainClass::NullRecurrent) {
        throw NumericalError(std::string("solve_null_recurrent got a ") + to_string(q.classification) + " chain");
    }
    const auto m = model.phases();
    const ShiftData sd = right_shift(model, q, opt.eps_zero);
    const DifferenceFactors f(sd.Gt, sd.split_t, sd.Wt);

    PoissonSolution sol;
    sol.classification = q.classification;
    sol.p = f.p();
    sol.nu = f.split.nu;
    sol.levels = opt.levels >= 0 ? opt.levels : default_levels(g);
    sol.warnings = q.warnings;
    sol.y_star = compute_y_star(f, g);
    sol.sigma1 = compute_sigma(f, g, 1);

    const auto st = stationary(model, q, Normalization::UnitSum);
    const auto [c, c_scale] = pi_dot_g(st.pi0, q.R, g);
    sol.pi_g = c;
    const Matrix wt_inv = (identity(m) - q.U) * (sd.Gt * sd.Gddot - identity(m));
    const Vector v = (st.pi0.transpose() * wt_inv * f.split.L).transpose();
    const Vector offset = detail::constrained_offset(v, c, c_scale, opt);
    sol.y_perp = offset;
    sol.y = sol.y_star + offset;

    const Matrix b_shift = model.b() + model.a1() * sd.Q;
    const Matrix coupling = (b_shift - identity(m)) * sd.Gddot + model.a1();
    const Vector rhs = g.at(0) + coupling * (sol.sigma1 + f.split.L * (f.V1_inv * sol.y));
    sol.alpha = opt.alpha;
    sol.x = group_inverse(model.b() + model.a1() * q.G, true).sharp * rhs + opt.alpha * ones(m);

    const auto shifted = evaluate_sequence(f, sol.x, offset, g, std::max(sol.levels, 2));
    sol.u.reserve(shifted.size());
    Vector running = Vector::Zero(m);
    for (const auto& ut : shifted) {
        sol.u.push_back(ut + sd.Q * running);
        running += ut;
    }
    sol.residuals = residuals(model, g, sol.u, opt.residual_tol);
    return sol;
}

/// The shifted sequence recovered from u: u~_k = u_k - Q (u~_0 + ... + u~_{k-1}).
inline std::vector<Vector> unshift(const Matrix& q_mat, const std::vector<Vector>& u)
{
    std::vector<Vector> out;
    out.reserve(u.size());
    Vector running = Vector::Zero(q_mat.rows());
    for (const auto& uk : u) {
        out.push_back(uk - q_mat * running);
        running += out.back();
    }
    return out;
}

} // namespace qbd
