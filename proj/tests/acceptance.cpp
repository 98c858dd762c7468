// One PASS/FAIL line per acceptance criterion; exit status is the number of
// failures.

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "qbd/qbd.hpp"
#include "support.hpp"

using namespace qbd;
using namespace qbd::testing;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double abs_dev(const Matrix& a, double expected) { return std::abs(a(0, 0) - expected); }

Outcome scalar_pr1()
{
    const auto model = pr1();
    const auto q = solve_all(model);
    const auto w = compute_w(q.G, q.U, q.R, q.Ghat).W;
    const auto st = stationary(model, q, Normalization::Probability);
    const double worst = std::max({abs_dev(q.G, 1.0), abs_dev(q.Ghat, 1.0 / 3.0), abs_dev(q.R, 1.0 / 3.0),
                                   abs_dev(q.U, 0.4), abs_dev(w, -2.5), std::abs(st.pi0(0) - 2.0 / 3.0)});
    std::ostringstream os;
    os << "max deviation " << worst;
    return {worst <= 1e-12, os.str()};
}

Outcome scalar_tr1()
{
    const auto model = tr1();
    const auto q = solve_all(model);
    const auto w = compute_w(q.G, q.U, q.R, q.Ghat).W;
    const auto gi = group_inverse(model.b() + model.a1() * q.G, false);
    double worst = std::max({abs_dev(q.G, 1.0 / 3.0), abs_dev(q.R, 1.0), abs_dev(w, -2.5), abs_dev(gi.sharp, 2.5)});
    PoissonOptions opt;
    opt.levels = 10;
    const auto sol = solve_poisson(model, scalar_rhs({1.0}), q, opt);
    double u_dev = 0.0;
    for (int r = 0; r <= 10; ++r) u_dev = std::max(u_dev, std::abs(sol.u[r](0) - 2.5 / std::pow(3.0, r)));
    std::ostringstream os;
    os << "block deviation " << worst << ", u deviation " << u_dev;
    return {worst <= 1e-12 && u_dev <= 1e-10, os.str()};
}

Outcome pr1_compatible_rhs()
{
    const auto model = pr1();
    const auto g = scalar_rhs({1.0, -3.0});
    const auto sol = solve_poisson(model, g);
    const double x = sol.x(0);
    double plateau = 0.0;
    for (std::size_t r = 1; r < sol.u.size(); ++r) plateau = std::max(plateau, std::abs(sol.u[r](0) - (x - 7.5)));
    const double res = sol.residuals.max_residual();
    const bool ok = std::abs(sol.pi_g) <= 1e-12 && std::abs(sol.y(0) + 2.5) <= 1e-12 &&
                    std::abs(sol.y_star(0) + 2.5) <= 1e-12 && std::abs(sol.u[0](0) - (x - 2.5)) <= 1e-12 &&
                    plateau <= 1e-9 && res < 1e-12;
    std::ostringstream os;
    os << "pi^T g " << sol.pi_g << ", y " << sol.y(0) << ", plateau deviation " << plateau << ", residual " << res;
    return {ok, os.str()};
}

Outcome identity_suite()
{
    double worst = 0.0;
    int failures = 0;
    for (int i = 0; i < 100; ++i) {
        const auto target = i % 2 == 0 ? ChainClass::PositiveRecurrent : ChainClass::Transient;
        const auto model = random_model(1000 + static_cast<std::uint64_t>(i), phases_for(i), target);
        const auto q = solve_all(model);
        const auto s = split(q.Ghat);
        const auto w = compute_w(q.G, q.U, q.R, q.Ghat).W;
        const auto rep = check_identities(model, q, s, w, 1e-8);
        worst = std::max(worst, rep.max_residual());
        if (!rep.all_pass()) ++failures;
    }
    std::ostringstream os;
    os << "100 models, max relative residual " << worst << ", failing models " << failures;
    return {failures == 0, os.str()};
}

Outcome group_inverse_equations()
{
    double worst = 0.0;
    int count = 0;
    for (int i = 0; i < 200; ++i) {
        const auto target = i % 2 == 0 ? ChainClass::PositiveRecurrent : ChainClass::NullRecurrent;
        const auto model = random_model(2000 + static_cast<std::uint64_t>(i), phases_for(i), target);
        const auto q = solve_all(model);
        const Matrix pstar = model.b() + model.a1() * q.G;
        const auto gi = group_inverse(pstar, true);
        const auto m = model.phases();
        const Matrix h = identity(m) - pstar;
        const double e1 = norm_inf(identity(m) - h * gi.sharp - ones(m) * gi.pi_star.transpose());
        const double e2 = (gi.pi_star.transpose() * gi.sharp).cwiseAbs().maxCoeff();
        worst = std::max({worst, e1, e2});
        ++count;
    }
    std::ostringstream os;
    os << count << " recurrent P*, max residual " << worst;
    return {worst <= 1e-10, os.str()};
}

Outcome end_to_end()
{
    double worst = 0.0;
    int failures = 0;
    std::string first_failure;
    for (auto target : {ChainClass::PositiveRecurrent, ChainClass::Transient, ChainClass::NullRecurrent}) {
        for (int i = 0; i < 100; ++i) {
            const auto seed = 3000 + static_cast<std::uint64_t>(i);
            const auto m = phases_for(i);
            const auto model = random_model(seed, m, target);
            const auto g = random_rhs(seed, m);
            PoissonOptions opt;
            opt.levels = g.support() + 8;
            try {
                const auto sol = solve(model, g, opt);
                worst = std::max(worst, sol.residuals.max_residual() / sol.residuals.scale);
                if (!sol.residuals.pass) ++failures;
            } catch (const Error& e) {
                ++failures;
                if (first_failure.empty()) first_failure = std::string(to_string(target)) + " seed " +
                                                           std::to_string(seed) + ": " + e.what();
            }
        }
    }
    std::ostringstream os;
    os << "300 models, max residual/scale " << worst << ", failures " << failures;
    if (!first_failure.empty()) os << " (" << first_failure << ")";
    return {failures == 0, os.str()};
}

Outcome nr1_differences()
{
    const auto sol = solve(nr1(), scalar_rhs({1.0, -2.0}));
    const auto& u = sol.u;
    const double d1 = u[1](0) - u[0](0), d2 = u[2](0) - u[1](0), d3 = u[3](0) - u[2](0);
    const bool ok = std::abs(d1 + 2.5) <= 1e-9 && std::abs(d2 - 2.5) <= 1e-9 && std::abs(d3 - 2.5) <= 1e-9;
    std::ostringstream os;
    os << "differences " << d1 << ", " << d2 << ", " << d3;
    return {ok, os.str()};
}

Outcome lemma_constant_shift()
{
    double worst = 0.0;
    int failures = 0;
    for (int i = 0; i < 25; ++i) {
        const auto seed = 4000 + static_cast<std::uint64_t>(i);
        const auto m = phases_for(i);
        const auto model = random_model(seed, m, ChainClass::PositiveRecurrent);
        const auto q = solve_all(model);
        const auto st = stationary(model, q, Normalization::Probability);
        const auto g = project_rhs(random_rhs(seed, m), st.pi0, q.R);
        PoissonOptions opt;
        opt.y_perp_mode = YPerpMode::Zero;
        const auto sol = solve_poisson(model, g, q, opt);
        const auto om = omega_solution(model, g, q, static_cast<int>(sol.u.size()) - 1);
        const auto cmp = compare_constant_shift(sol.u, om.omega);
        worst = std::max(worst, cmp.max_dev);
        if (!cmp.is_match) ++failures;
    }
    std::ostringstream os;
    os << "25 models, max deviation from a constant " << worst;
    return {failures == 0 && worst < 1e-7, os.str()};
}

Outcome omega_residuals()
{
    struct Case {
        const char* name;
        QbdModel model;
        RhsSpec g;
    };
    const std::vector<Case> cases = {
        {"PR1", pr1(), scalar_rhs({1.0, -3.0})},
        {"TR1", tr1(), scalar_rhs({1.0})},
        {"TR1 g=(1,2,-1)", tr1(), scalar_rhs({1.0, 2.0, -1.0})},
        {"NR1 g=(1,-1)", nr1(), scalar_rhs({1.0, -1.0})},
    };
    std::ostringstream os;
    bool ok = true;
    for (const auto& c : cases) {
        const auto om = omega_solution(c.model, c.g, c.g.support() + 10);
        const auto rep = residuals(c.model, c.g, om.omega, 1e-7);
        ok = ok && rep.pass;
        os << c.name << " " << rep.max_residual() << "; ";
    }
    for (int i = 0; i < 10; ++i) {
        const auto seed = 5000 + static_cast<std::uint64_t>(i);
        const auto m = phases_for(i + 1);
        const auto model = random_model(seed, m, ChainClass::Transient);
        const auto g = random_rhs(seed, m);
        const auto om = omega_solution(model, g, g.support() + 10);
        ok = ok && residuals(model, g, om.omega, 1e-7).pass;
    }
    os << "10 random transient models";
    return {ok, os.str()};
}

Outcome corollary_path()
{
    double worst = 0.0;
    int tested = 0, failures = 0;
    for (int i = 0; tested < 40 && i < 200; ++i) {
        const auto seed = 6000 + static_cast<std::uint64_t>(i);
        const auto m = phases_for(i);
        const auto target = i % 2 == 0 ? ChainClass::PositiveRecurrent : ChainClass::Transient;
        const auto model = random_model(seed, m, target);
        if (!(condition_number(model.a1()) < 1e8)) continue;
        const auto q = solve_all(model);
        const auto g = random_rhs(seed, m);
        PoissonOptions opt;
        opt.levels = g.support() + 8;
        const auto a = solve_poisson(model, g, q, opt);
        const auto b = solve_nonsingular_a1(model, g, q, opt);
        const auto d = difference(a.u, b.u);
        const auto rep = homogeneous_residuals(model, d, 1e-8);
        const double rel = rep.max_residual() / std::max(a.residuals.scale, b.residuals.scale);
        worst = std::max(worst, rel);
        if (rel > 1e-8 || !b.residuals.pass) ++failures;
        ++tested;
    }
    std::ostringstream os;
    os << tested << " models with nonsingular A1, max relative residual of the difference " << worst;
    return {failures == 0 && tested > 0, os.str()};
}

Outcome homogeneous_family()
{
    double worst = 0.0;
    for (int i = 0; i < 40; ++i) {
        const auto seed = 7000 + static_cast<std::uint64_t>(i);
        const auto m = phases_for(i);
        const auto target = i % 2 == 0 ? ChainClass::PositiveRecurrent : ChainClass::Transient;
        const auto model = random_model(seed, m, target);
        const auto q = solve_all(model);
        const auto g = random_rhs(seed, m);
        const auto f = make_factors(q);
        CounterRng rng(seed);
        Vector x(m), dx(m), y(f.p()), dy(f.p());
        for (Eigen::Index k = 0; k < m; ++k) {
            x(k) = rng.uniform(-1, 1);
            dx(k) = rng.uniform(-1, 1);
        }
        for (Eigen::Index k = 0; k < f.p(); ++k) {
            y(k) = rng.uniform(-1, 1);
            dy(k) = rng.uniform(-1, 1);
        }
        const int levels = g.support() + 8;
        for (int r = 0; r <= levels; ++r) {
            const Vector base = evaluate_u(f, x, y, g, r);
            const Vector moved = evaluate_u(f, x + dx, y + dy, g, r);
            Vector expected = matrix_power(f.G, r) * dx;
            if (f.p() > 0) expected += f.split.L * (matrix_power(f.V1_inv, r) * dy);
            const double scale = 1.0 + std::max(base.cwiseAbs().maxCoeff(), moved.cwiseAbs().maxCoeff());
            worst = std::max(worst, (moved - base - expected).cwiseAbs().maxCoeff() / scale);
        }
    }
    std::ostringstream os;
    os << "40 models, max relative deviation " << worst;
    return {worst <= 1e-9, os.str()};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"PR1 scalar blocks", scalar_pr1},
        {"TR1 scalar blocks and solution", scalar_tr1},
        {"PR1 with g=(1,-3)", pr1_compatible_rhs},
        {"identity suite on random models", identity_suite},
        {"group inverse equations", group_inverse_equations},
        {"end-to-end residuals", end_to_end},
        {"NR1 differences", nr1_differences},
        {"probabilistic solution up to a constant", lemma_constant_shift},
        {"probabilistic solution residuals", omega_residuals},
        {"nonsingular A1 path", corollary_path},
        {"homogeneous family", homogeneous_family},
    };
    int failures = 0;
    int index = 1;
    std::setvbuf(stdout, nullptr, _IOLBF, 0);
    for (const auto& [name, check] : criteria) {
        Outcome out;
        try {
            out = check();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        if (!out.pass) ++failures;
        std::printf("[%s] criterion %2d: %s -- %s\n", out.pass ? "PASS" : "FAIL", index++, name, out.detail.c_str());
    }
    return failures;
}
