#pragma once

// Command-line front end. run() never exits the process; it returns the exit
// code and writes results to `out` and a JSON error object to `err`:
//
//     0  success
//     1  validation error (bad flags, malformed or invalid model)
//     2  numerical failure (including a failed residual report)
//     3  infeasible constraint

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qbd/qbd.hpp"

namespace qbd::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2, kInfeasible = 3 };

struct CliConfig {
    std::string command;
    std::string input;
    std::string output;
    std::string csv;
    int levels = -1;
    double alpha = 0.0;
    std::string y_perp_mode = "minimal_norm";
    std::vector<double> y_perp_vector;
    std::vector<double> y_free;
    double stoch_tol = 1e-12;
    double null_band = 1e-9;
    double qme_tol = 1e-10;
    double eps_zero = -1.0;
    double residual_tol = 1e-7;
    double identity_tol = 1e-8;
};

namespace detail {

inline std::string read_input(const std::string& path)
{
    if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open input file " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Vector to_vector(const std::vector<double>& v)
{
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

inline json root_to_json(const Complex& z)
{
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return "inf";
    if (std::abs(z.imag()) <= 1e-12) return z.real();
    return json{{"re", z.real()}, {"im", z.imag()}};
}

inline json residuals_to_json(const ResidualReport& r)
{
    return json{{"boundary", r.boundary_residual}, {"interior", r.interior_residuals}, {"max", r.max_residual()},
                {"scale", r.scale},           {"tol", r.tol},                  {"pass", r.pass}};
}

inline json identities_to_json(const IdentityReport& rep)
{
    json checks = json::array();
    for (const auto& c : rep.checks) {
        checks.push_back({{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"pass", c.pass()}});
    }
    return checks;
}

inline QmeOptions qme_options(const CliConfig& cfg)
{
    QmeOptions q;
    q.tol = cfg.qme_tol;
    q.null_band = cfg.null_band;
    return q;
}

inline PoissonOptions poisson_options(const CliConfig& cfg)
{
    PoissonOptions opt;
    opt.levels = cfg.levels;
    opt.alpha = cfg.alpha;
    opt.eps_zero = cfg.eps_zero;
    opt.residual_tol = cfg.residual_tol;
    opt.qme = qme_options(cfg);
    if (!cfg.y_perp_vector.empty()) {
        opt.y_perp_mode = YPerpMode::Explicit;
        opt.y_perp = to_vector(cfg.y_perp_vector);
    } else if (cfg.y_perp_mode == "zero") {
        opt.y_perp_mode = YPerpMode::Zero;
    }
    if (!cfg.y_free.empty()) opt.y_free = to_vector(cfg.y_free);
    return opt;
}

inline json solution_to_json(const PoissonSolution& s)
{
    json u = json::array();
    for (const auto& ur : s.u) u.push_back(vector_to_json(ur));
    return json{{"class", to_string(s.classification)},
                {"x", vector_to_json(s.x)},
                {"y", vector_to_json(s.y)},
                {"y_star", vector_to_json(s.y_star)},
                {"y_perp", vector_to_json(s.y_perp)},
                {"alpha", s.alpha},
                {"pi_g", s.pi_g},
                {"sigma1", vector_to_json(s.sigma1)},
                {"p", s.p},
                {"nu", s.nu},
                {"levels", s.levels},
                {"u", std::move(u)},
                {"residuals", residuals_to_json(s.residuals)},
                {"warnings", s.warnings}};
}

inline std::string solution_csv(const PoissonSolution& s)
{
    std::ostringstream os;
    os.precision(17);
    os << "level";
    const auto m = s.u.empty() ? 0 : s.u.front().size();
    for (Eigen::Index i = 0; i < m; ++i) os << ",phase_" << i;
    os << '\n';
    for (std::size_t r = 0; r < s.u.size(); ++r) {
        os << r;
        for (Eigen::Index i = 0; i < m; ++i) os << ',' << s.u[r](i);
        os << '\n';
    }
    return os.str();
}

inline void write_file(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + path);
    f << text;
}

inline std::string csv_path_for(const std::string& json_path)
{
    const auto slash = json_path.find_last_of('/');
    const auto dot = json_path.find_last_of('.');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
        return json_path.substr(0, dot) + ".csv";
    }
    return json_path + ".csv";
}

inline void emit(const CliConfig& cfg, std::ostream& out, const json& doc)
{
    const std::string text = doc.dump(2) + "\n";
    if (cfg.output.empty()) {
        out << text;
    } else {
        write_file(cfg.output, text);
    }
}

inline int cmd_validate(const CliConfig& cfg, std::ostream& out)
{
    const Problem prob = parse_problem(read_input(cfg.input));
    const auto rep = validate(prob.model, cfg.stoch_tol);
    json doc{{"ok", rep.ok()},
             {"tolerance", rep.tolerance},
             {"errors", rep.errors()},
             {"warnings", rep.warnings},
             {"level0_row_residual", rep.level0_row_residual},
             {"repeating_row_residual", rep.repeating_row_residual},
             {"phase_irreducible", rep.phase_irreducible},
             {"truncation_irreducible", rep.truncation_irreducible}};
    emit(cfg, out, doc);
    return rep.ok() ? kOk : kValidation;
}

inline int cmd_classify(const CliConfig& cfg, std::ostream& out)
{
    const Problem prob = load_problem(read_input(cfg.input), cfg.stoch_tol);
    const auto q = solve_all(prob.model, qme_options(cfg));
    json roots = json::array();
    for (const auto& z : char_roots(q)) roots.push_back(root_to_json(z));
    json doc{{"class", to_string(q.classification)},
             {"drift", q.drift},
             {"roots", std::move(roots)},
             {"sp_G", q.sp_G},
             {"sp_Ghat", q.sp_Ghat},
             {"sp_R", q.sp_R},
             {"warnings", q.warnings}};
    emit(cfg, out, doc);
    return kOk;
}

inline int cmd_solve(const CliConfig& cfg, std::ostream& out)
{
    const Problem prob = load_problem(read_input(cfg.input), cfg.stoch_tol);
    const auto sol = solve(prob.model, prob.rhs, poisson_options(cfg));
    emit(cfg, out, solution_to_json(sol));
    std::string csv = cfg.csv;
    if (csv.empty() && !cfg.output.empty()) csv = csv_path_for(cfg.output);
    if (!csv.empty()) write_file(csv, solution_csv(sol));
    return sol.residuals.pass ? kOk : kNumerical;
}

inline int cmd_lemmas(const CliConfig& cfg, std::ostream& out)
{
    const Problem prob = load_problem(read_input(cfg.input), cfg.stoch_tol);
    const auto q = solve_all(prob.model, qme_options(cfg));
    json doc{{"class", to_string(q.classification)}};
    bool pass = false;
    if (q.classification == ChainClass::NullRecurrent) {
        const auto sd = right_shift(prob.model, q, cfg.eps_zero);
        const auto rep = shift_invariants(q, sd, std::max(cfg.identity_tol, 1e-10));
        doc["checks"] = identities_to_json(rep);
        doc["normalization"] = sd.normalization;
        pass = rep.all_pass();
    } else {
        const auto s = split(q.Ghat, cfg.eps_zero);
        const auto rd = compute_w(q.G, q.U, q.R, q.Ghat);
        const auto rep = check_identities(prob.model, q, s, rd.W, cfg.identity_tol);
        doc["checks"] = identities_to_json(rep);
        doc["p"] = s.p;
        doc["nu"] = s.nu;
        doc["w_series"] = {{"deviation", rd.series_deviation},
                           {"terms", rd.series_terms},
                           {"converged", rd.series_converged}};
        pass = rep.all_pass();
    }
    doc["all_pass"] = pass;
    emit(cfg, out, doc);
    return pass ? kOk : kNumerical;
}

inline int cmd_compare_prob(const CliConfig& cfg, std::ostream& out)
{
    const Problem prob = load_problem(read_input(cfg.input), cfg.stoch_tol);
    const auto opt = poisson_options(cfg);
    const auto q = solve_all(prob.model, opt.qme);
    const auto sol = solve(prob.model, prob.rhs, q, opt);
    const int levels = static_cast<int>(sol.u.size()) - 1;
    const auto om = omega_solution(prob.model, prob.rhs, q, levels);
    const auto cmp = compare_constant_shift(sol.u, om.omega);
    const auto om_res = residuals(prob.model, prob.rhs, om.omega, cfg.residual_tol);
    json doc{{"class", to_string(q.classification)},
             {"is_match", cmp.is_match},
             {"offset", cmp.offset},
             {"max_dev", cmp.max_dev},
             {"levels", levels},
             {"gamma", vector_to_json(om.gamma)},
             {"omega_residuals", residuals_to_json(om_res)}};
    emit(cfg, out, doc);
    return kOk;
}

inline int cmd_oracle(const CliConfig& cfg, std::ostream& out)
{
    const Problem prob = load_problem(read_input(cfg.input), cfg.stoch_tol);
    const auto sol = solve(prob.model, prob.rhs, poisson_options(cfg));
    const int horizon = std::min(static_cast<int>(sol.u.size()) - 1, prob.rhs.support() + 5);
    const auto fwd = forward_oracle(prob.model, prob.rhs, sol.u[0], sol.u[1], horizon);
    double dev = 0.0;
    for (int r = 0; r <= horizon; ++r) {
        const auto ri = static_cast<std::size_t>(r);
        dev = std::max(dev, (fwd[ri] - sol.u[ri]).cwiseAbs().maxCoeff());
    }
    const double scale = sol.residuals.scale;
    const bool pass = dev <= 1e-6 * scale;
    json doc{{"class", to_string(sol.classification)},
             {"horizon", horizon},
             {"max_deviation", dev},
             {"scale", scale},
             {"pass", pass}};
    emit(cfg, out, doc);
    return pass ? kOk : kNumerical;
}

inline int report(std::ostream& err, const char* kind, int code, const std::string& message)
{
    err << json{{"error", {{"type", kind}, {"exit_code", code}, {"message", message}}}}.dump() << "\n";
    return code;
}

inline void add_common(CLI::App* sub, CliConfig& cfg)
{
    sub->add_option("input", cfg.input, "problem JSON file (- for stdin)")->required();
    sub->add_option("-o,--output", cfg.output, "write the JSON result here instead of standard output");
    sub->add_option("--stoch-tol", cfg.stoch_tol, "tolerance for row sums and nonnegativity")
        ->check(CLI::PositiveNumber);
    sub->add_option("--null-band", cfg.null_band, "|drift| at or below this is null recurrent")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--qme-tol", cfg.qme_tol, "residual tolerance for the quadratic matrix equations")
        ->check(CLI::PositiveNumber);
    sub->add_option("--eps-zero", cfg.eps_zero, "modulus below which an eigenvalue of Ghat is zero")
        ->check(CLI::PositiveNumber);
}

inline void add_solution_flags(CLI::App* sub, CliConfig& cfg)
{
    sub->add_option("--levels", cfg.levels, "horizon R_max (default N + 10)")->check(CLI::Range(2, 1000000));
    sub->add_option("--alpha", cfg.alpha, "multiple of the all-ones vector added to x (recurrent chains)");
    sub->add_option("--y-perp", cfg.y_perp_mode, "free component of y")
        ->check(CLI::IsMember({"minimal_norm", "zero"}));
    sub->add_option("--y-perp-vector", cfg.y_perp_vector, "explicit y_perp satisfying the constraint")
        ->delimiter(',');
    sub->add_option("--y-free", cfg.y_free, "free vector y for a transient chain")->delimiter(',');
    sub->add_option("--residual-tol", cfg.residual_tol, "relative residual tolerance")->check(CLI::PositiveNumber);
}

} // namespace detail

/// args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CliConfig cfg;
    CLI::App app{"General solutions of the Poisson equation for quasi-birth-and-death processes", "qbd_poisson"};
    app.require_subcommand(1);

    auto* validate_cmd = app.add_subcommand("validate", "structural checks on the model");
    auto* classify_cmd = app.add_subcommand("classify", "classification, drift and characteristic roots");
    auto* solve_cmd = app.add_subcommand("solve", "general solution u_0 .. u_R_max (JSON plus CSV)");
    auto* lemmas_cmd = app.add_subcommand("lemmas", "residuals of the identities behind the construction");
    auto* compare_cmd = app.add_subcommand("compare-prob", "probabilistic solution against u up to a constant");
    auto* oracle_cmd = app.add_subcommand("oracle", "forward-recurrence cross-check (needs nonsingular A1)");
    for (auto* sub : {validate_cmd, classify_cmd, solve_cmd, lemmas_cmd, compare_cmd, oracle_cmd}) {
        detail::add_common(sub, cfg);
    }
    for (auto* sub : {solve_cmd, compare_cmd, oracle_cmd}) detail::add_solution_flags(sub, cfg);
    solve_cmd->add_option("--csv", cfg.csv, "CSV path (default: output path with .csv)");
    lemmas_cmd->add_option("--identity-tol", cfg.identity_tol, "relative tolerance for every identity")
        ->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        return detail::report(err, "UsageError", kValidation, e.what());
    }

    try {
        if (*validate_cmd) return detail::cmd_validate(cfg, out);
        if (*classify_cmd) return detail::cmd_classify(cfg, out);
        if (*solve_cmd) return detail::cmd_solve(cfg, out);
        if (*lemmas_cmd) return detail::cmd_lemmas(cfg, out);
        if (*compare_cmd) return detail::cmd_compare_prob(cfg, out);
        if (*oracle_cmd) return detail::cmd_oracle(cfg, out);
    } catch (const ValidationError& e) {
        return detail::report(err, "ValidationError", kValidation, e.what());
    } catch (const InfeasibleError& e) {
        return detail::report(err, "InfeasibleError", kInfeasible, e.what());
    } catch (const NumericalError& e) {
        return detail::report(err, "NumericalError", kNumerical, e.what());
    } catch (const std::exception& e) {
        return detail::report(err, "NumericalError", kNumerical, e.what());
    }
    return kValidation;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, out, err);
}

} // namespace qbd::cli
