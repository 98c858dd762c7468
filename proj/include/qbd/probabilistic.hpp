#pragma once

// Probabilistic particular solution
//
//     omega_r = G^r gamma + y_r,
//     gamma   = (I - P*)^# sum_k R^k g_k,
//     y_r     = -sum_{j=0}^{r-1} G^j (U - I)^-1 z_{r-j},   z_n = sum_{k>=0} R^k g_{n+k},
//
// used as an oracle independent of the spectral construction.

#include <cmath>
#include <string>
#include <vector>

#include "qbd/linalg.hpp"
#include "qbd/model.hpp"
#include "qbd/poisson.hpp"
#include "qbd/qme.hpp"

namespace qbd {

struct ProbSolution {
    Vector gamma;
    std::vector<Vector> y_seq;
    std::vector<Vector> omega;
    double c = 0.0;
    int truncation_K = 0;  ///< last level of g entering the sums (the support N)
};

/// z_n = sum_{k=0}^{N-n} R^k g_{n+k}; zero for n > N.
inline Vector tail_sum(const Matrix& r, const RhsSpec& g, int n)
{
    Vector out = Vector::Zero(r.rows());
    // Horner from the far end: z_n = g_n + R z_{n+1}
    for (int k = g.support(); k >= n; --k) out = g.at(k) + r * out;
    return out;
}

inline ProbSolution omega_solution(const QbdModel& model, const RhsSpec& g, const QmeSolutions& q, int levels,
                                   double compat_tol = 1e-9)
{
    const auto m = model.phases();
    const Matrix pstar = model.b() + model.a1() * q.G;
    const bool recurrent = q.classification != ChainClass::Transient;
    const auto gi = group_inverse(pstar, recurrent);
    const Vector z0 = tail_sum(q.R, g, 0);
    if (recurrent) {
        const double compat = gi.pi_star.dot(z0);
        const double scale = gi.pi_star.cwiseAbs().dot(z0.cwiseAbs()) + 1.0;
        if (std::abs(compat) > compat_tol * scale) {
            throw InfeasibleError("compatibility condition violated: pi*^T sum_k R^k g_k = " + std::to_string(compat));
        }
    }

    ProbSolution out;
    out.truncation_K = g.support();
    out.gamma = gi.sharp * z0;
    Eigen::PartialPivLU<Matrix> u_lu(q.U - identity(m));
    const Vector zero = Vector::Zero(m);

    // w_n = (U - I)^-1 z_n; y_{r+1} = G y_r - w_{r+1}
    Vector y = zero;
    Vector g_gamma = out.gamma;
    for (int r = 0; r <= levels; ++r) {
        if (r > 0) y = q.G * y - u_lu.solve(tail_sum(q.R, g, r));
        out.y_seq.push_back(y);
        out.omega.push_back(g_gamma + y);
        g_gamma = q.G * g_gamma;
    }
    return out;
}

inline ProbSolution omega_solution(const QbdModel& model, const RhsSpec& g, int levels, const QmeOptions& opt = {})
{
    return omega_solution(model, g, solve_all(model, opt), levels);
}

struct ShiftComparison {
    bool is_match = false;
    double offset = 0.0;
    double max_dev = 0.0;
};

/// d_r = omega_r - u_r; matches when every component of every d_r is within
/// tol of the mean component.
inline ShiftComparison compare_constant_shift(const std::vector<Vector>& u, const std::vector<Vector>& omega,
                                              double tol = 1e-7)
{
    if (u.size() != omega.size()) throw ValidationError("compare_constant_shift: sequences differ in length");
    ShiftComparison out;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < u.size(); ++r) {
        if (u[r].size() != omega[r].size()) throw ValidationError("compare_constant_shift: block sizes differ");
        sum += (omega[r] - u[r]).sum();
        count += static_cast<std::size_t>(u[r].size());
    }
    out.offset = count > 0 ? sum / static_cast<double>(count) : 0.0;
    for (std::size_t r = 0; r < u.size(); ++r) {
        const Vector d = (omega[r] - u[r]).array() - out.offset;
        if (d.size() > 0) out.max_dev = std::max(out.max_dev, d.cwiseAbs().maxCoeff());
    }
    out.is_match = out.max_dev <= tol;
    return out;
}

} // namespace qbd
