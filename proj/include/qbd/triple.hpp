#pragma once

// The matrix W linking G, Ghat and R, the resolvent triple (X, T, Z) of
// eta(lambda) built from G and the split of Ghat, and a residual report for
// every identity that ties them together.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "qbd/linalg.hpp"
#include "qbd/model.hpp"
#include "qbd/qme.hpp"
#include "qbd/spectral.hpp"

namespace qbd {

struct ResolventData {
    Matrix W;
    Matrix W_inv;               ///< (I - U)(G Ghat - I)
    double series_deviation = 0.0;  ///< ||W - truncated series||_inf / max(1, ||W||_inf)
    int series_terms = 0;
    bool series_converged = false;
};

/// Truncated sum_{j} G^j (U - I)^-1 R^j, stopping when a term drops below
/// term_tol or after max_terms terms.
inline Matrix w_series(const Matrix& g, const Matrix& u, const Matrix& r, int max_terms, double term_tol,
                       int* terms_used = nullptr, bool* converged = nullptr)
{
    const auto m = g.rows();
    const Matrix base = (u - identity(m)).partialPivLu().inverse();
    Matrix sum = Matrix::Zero(m, m);
    Matrix left = identity(m);
    Matrix right = identity(m);
    bool done = false;
    int j = 0;
    for (; j < max_terms; ++j) {
        const Matrix term = left * base * right;
        sum += term;
        if (norm_inf(term) < term_tol) {
            done = true;
            ++j;
            break;
        }
        left = left * g;
        right = right * r;
    }
    if (terms_used) *terms_used = j;
    if (converged) *converged = done;
    return sum;
}

/// W from the closed form [(I - U)(G Ghat - I)]^-1, cross-checked against the
/// defining series. Requires a chain that is not null recurrent.
inline ResolventData compute_w(const Matrix& g, const Matrix& u, const Matrix& r, const Matrix& ghat,
                               double max_cond = 1e14)
{
    const auto m = g.rows();
    const double rho = spectral_radius(g) * spectral_radius(r);
    if (!(rho < 1.0 - 1e-9)) {
        throw NumericalError("W is undefined for a null recurrent chain (sp(G) sp(R) = " + std::to_string(rho) + ")");
    }
    ResolventData out;
    out.W_inv = (identity(m) - u) * (g * ghat - identity(m));
    out.W = checked_solve(out.W_inv, identity(m), max_cond, "(I - U)(G Ghat - I)");
    const Matrix series = w_series(g, u, r, 10 * static_cast<int>(m) + 200, 1e-14, &out.series_terms,
                                   &out.series_converged);
    out.series_deviation = norm_inf(out.W - series) / std::max(1.0, norm_inf(out.W));
    return out;
}

struct ResolventTriple {
    Matrix X1, X2, T1, T2, Z1, Z2;

    /// X diag(lambda I - T1, lambda T2 - I)^-1 Z.
    CMatrix resolvent(Complex lambda) const
    {
        const auto n1 = T1.rows();
        const auto n2 = T2.rows();
        CMatrix out = X1.cast<Complex>() *
                      (lambda * CMatrix::Identity(n1, n1) - T1.cast<Complex>()).partialPivLu().solve(
                          Z1.cast<Complex>());
        if (n2 > 0) {
            out += X2.cast<Complex>() *
                   (lambda * T2.cast<Complex>() - CMatrix::Identity(n2, n2)).partialPivLu().solve(Z2.cast<Complex>());
        }
        return out;
    }

    /// [[X1, X2 T2], [X1 T1, X2]], nonsingular for a decomposable pair.
    Matrix pair_matrix() const
    {
        const auto m = X1.rows();
        Matrix out(2 * m, 2 * m);
        const auto n1 = X1.cols();
        out.block(0, 0, m, n1) = X1;
        out.block(0, n1, m, X2.cols()) = X2 * T2;
        out.block(m, 0, m, n1) = X1 * T1;
        out.block(m, n1, m, X2.cols()) = X2;
        return out;
    }
};

/// X1 = [I | L], X2 = K, T1 = diag(G, V1^-1), T2 = V0, Z1 = [W; -E W], Z2 = -V0 F W.
inline ResolventTriple build_triple(const Matrix& g, const SpectralSplit& s, const Matrix& w, double max_cond = 1e12)
{
    const auto m = g.rows();
    const auto p = s.p;
    ResolventTriple t;
    t.X1.resize(m, m + p);
    t.X1.leftCols(m) = identity(m);
    t.X1.rightCols(p) = s.L;
    t.X2 = s.K;
    t.T1 = Matrix::Zero(m + p, m + p);
    t.T1.topLeftCorner(m, m) = g;
    if (p > 0) t.T1.bottomRightCorner(p, p) = checked_solve(s.V1, identity(p), max_cond, "V1");
    t.T2 = s.V0;
    t.Z1.resize(m + p, m);
    t.Z1.topRows(m) = w;
    t.Z1.bottomRows(p) = -s.E * w;
    t.Z2 = -s.V0 * s.F * w;
    const double cond = condition_number(t.pair_matrix());
    if (!(cond < max_cond)) {
        throw NumericalError("decomposable pair matrix is singular (condition number " + std::to_string(cond) + ")");
    }
    return t;
}

struct IdentityCheck {
    std::string name;
    double value = 0.0;  ///< relative residual (or condition number for the pair matrix)
    double limit = 0.0;  ///< pass threshold
    bool pass() const { return value <= limit; }
};

struct IdentityReport {
    std::vector<IdentityCheck> checks;

    bool all_pass() const
    {
        for (const auto& c : checks) {
            if (!c.pass()) return false;
        }
        return true;
    }
    double max_residual() const
    {
        double worst = 0.0;
        for (const auto& c : checks) {
            if (c.name != "pair_matrix_condition") worst = std::max(worst, c.value);
        }
        return worst;
    }
};

/// Sample points for the resolvent identity, keeping distance > 0.05 from
/// every characteristic root.
inline std::vector<Complex> resolvent_samples(const std::vector<Complex>& roots)
{
    const std::array<Complex, 4> candidates = {Complex(-0.5, 0.0), Complex(0.5, 0.3), Complex(2.2, 0.0),
                                               Complex(1.7, -0.9)};
    std::vector<Complex> out;
    for (const auto& c : candidates) {
        bool far = true;
        for (const auto& r : roots) {
            if (std::isfinite(r.real()) && std::abs(c - r) <= 0.05) far = false;
        }
        if (far) out.push_back(c);
    }
    return out;
}

/// Residuals of W^-1 = (I-U)(G Ghat - I), W R = Ghat W, W A1 (G Ghat - I) = Ghat,
/// W = M (A1 G M - Y)^-1, the decomposable-pair conditions and the resolvent
/// identity at the sample points. Every residual is relative to the size of
/// the terms it compares; tol applies to all of them and the pair matrix
/// condition number is compared against max_cond.
inline IdentityReport check_identities(const QbdModel& model, const QmeSolutions& q, const SpectralSplit& s,
                                       const Matrix& w, double tol = 1e-8, double max_cond = 1e12)
{
    const auto m = model.phases();
    const Matrix i_m = identity(m);
    const Matrix& a_neg = model.a_minus();
    const Matrix a0_i = model.a0() - i_m;
    const Matrix& a1 = model.a1();
    const Matrix ggh = q.G * q.Ghat - i_m;
    IdentityReport rep;
    auto add = [&](std::string name, double num, double den) {
        rep.checks.push_back({std::move(name), num / std::max(den, 1e-300), tol});
    };

    add("w_inverse_closed_form", norm_inf(w * ((i_m - q.U) * ggh) - i_m), 1.0);
    add("w_r_equals_ghat_w", norm_inf(w * q.R - q.Ghat * w), norm_inf(w) * (norm_inf(q.R) + norm_inf(q.Ghat)));
    add("w_a1_ggh_equals_ghat", norm_inf(w * a1 * ggh - q.Ghat), norm_inf(w) * norm_inf(a1) * norm_inf(ggh) + norm_inf(q.Ghat));

    // Y = [A1 L V1^-1 | -A_neg K V0 - (A0 - I) K]
    const auto p = s.p;
    Matrix y(m, m);
    if (p > 0) y.leftCols(p) = a1 * s.L * s.V1.partialPivLu().inverse();
    if (p < m) y.rightCols(m - p) = -a_neg * s.K * s.V0 - a0_i * s.K;
    const Matrix s_mat = a1 * q.G * s.M - y;
    add("w_from_m_and_y", norm_inf(w * s_mat - s.M), norm_inf(w) * norm_inf(s_mat) + norm_inf(s.M));

    const auto t = build_triple(q.G, s, w, std::numeric_limits<double>::infinity());
    {
        const double x = norm_inf(t.X1), tn = norm_inf(t.T1);
        const Matrix sum = a_neg * t.X1 + a0_i * t.X1 * t.T1 + a1 * t.X1 * t.T1 * t.T1;
        add("pair_condition_iii_x1", norm_inf(sum),
            x * (norm_inf(a_neg) + norm_inf(a0_i) * tn + norm_inf(a1) * tn * tn));
    }
    if (t.X2.cols() > 0) {
        const double x = norm_inf(t.X2), tn = norm_inf(t.T2);
        const Matrix sum = a1 * t.X2 + a0_i * t.X2 * t.T2 + a_neg * t.X2 * t.T2 * t.T2;
        add("pair_condition_iii_x2", norm_inf(sum),
            x * (norm_inf(a1) + norm_inf(a0_i) * tn + norm_inf(a_neg) * tn * tn));
    }
    rep.checks.push_back({"pair_matrix_condition", condition_number(t.pair_matrix()), max_cond});

    for (const auto& lambda : resolvent_samples(char_roots(q))) {
        const CMatrix eta_inv = model.eta(lambda).partialPivLu().inverse();
        const CMatrix via_triple = t.resolvent(lambda);
        std::string name = "resolvent_at_" + std::to_string(lambda.real()) + (lambda.imag() < 0 ? "-" : "+") +
                           std::to_string(std::abs(lambda.imag())) + "i";
        add(std::move(name), norm_inf((eta_inv - via_triple).cwiseAbs()), norm_inf(eta_inv.cwiseAbs()));
    }
    return rep;
}

} // namespace qbd
