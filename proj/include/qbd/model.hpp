#pragma once

// QBD transition blocks, finitely supported right-hand sides, their JSON
// document format and the structural checks run on load.

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qbd/linalg.hpp"

namespace qbd {

/// The four m x m blocks of the level-structured transition matrix
///
///     | B      A1                |
///     | A_neg  A0   A1           |
///     |        A_neg A0  A1 ...  |
///
/// Immutable after construction. Only shapes are checked here; the
/// probabilistic invariants are checked by validate().
class QbdModel {
public:
    QbdModel(Matrix b, Matrix a_minus, Matrix a0, Matrix a1)
        : b_(std::move(b)), a_minus_(std::move(a_minus)), a0_(std::move(a0)), a1_(std::move(a1))
    {
        const auto m = b_.rows();
        auto check = [m](const Matrix& x, const char* name) {
            if (x.rows() != m || x.cols() != m) {
                throw ValidationError(std::string("block ") + name + " is " + std::to_string(x.rows()) + "x" +
                                      std::to_string(x.cols()) + ", expected " + std::to_string(m) + "x" +
                                      std::to_string(m));
            }
        };
        if (m <= 0) throw ValidationError("phase count must be positive");
        check(b_, "B");
        check(a_minus_, "A_minus");
        check(a0_, "A0");
        check(a1_, "A1");
    }

    Eigen::Index phases() const { return b_.rows(); }
    const Matrix& b() const { return b_; }
    const Matrix& a_minus() const { return a_minus_; }
    const Matrix& a0() const { return a0_; }
    const Matrix& a1() const { return a1_; }

    /// eta(lambda) = A_neg + (A0 - I) lambda + A1 lambda^2.
    CMatrix eta(Complex lambda) const
    {
        const auto m = phases();
        return a_minus_.cast<Complex>() + (a0_ - identity(m)).cast<Complex>() * lambda +
               a1_.cast<Complex>() * (lambda * lambda);
    }

    friend bool operator==(const QbdModel& x, const QbdModel& y)
    {
        return x.b_ == y.b_ && x.a_minus_ == y.a_minus_ && x.a0_ == y.a0_ && x.a1_ == y.a1_;
    }

private:
    Matrix b_;
    Matrix a_minus_;
    Matrix a0_;
    Matrix a1_;
};

/// Right-hand side blocks g_0 ... g_N; g_k = 0 for k > N.
class RhsSpec {
public:
    RhsSpec(std::vector<Vector> blocks, Eigen::Index m) : blocks_(std::move(blocks)), m_(m)
    {
        if (blocks_.empty()) throw ValidationError("right-hand side needs at least the block g_0");
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            if (blocks_[k].size() != m) {
                throw ValidationError("g[" + std::to_string(k) + "] has length " +
                                      std::to_string(blocks_[k].size()) + ", expected " + std::to_string(m));
            }
        }
    }

    /// Index N of the last stored block.
    int support() const { return static_cast<int>(blocks_.size()) - 1; }
    Eigen::Index phases() const { return m_; }

    /// g_k, zero beyond the support (and for negative k).
    Vector at(int k) const
    {
        if (k < 0 || k > support()) return Vector::Zero(m_);
        return blocks_[static_cast<std::size_t>(k)];
    }

    const std::vector<Vector>& blocks() const { return blocks_; }

    friend bool operator==(const RhsSpec& x, const RhsSpec& y) { return x.blocks_ == y.blocks_; }

private:
    std::vector<Vector> blocks_;
    Eigen::Index m_;
};

struct Problem {
    QbdModel model;
    RhsSpec rhs;
};

/// Outcome of the structural checks. ok() is the acceptance verdict; the
/// truncation connectivity is advisory and only produces a warning.
struct ValidationReport {
    double tolerance = 1e-12;
    std::vector<std::string> entry_violations;
    double level0_row_residual = 0.0;      ///< max_i |((B + A1) 1)_i - 1|
    int level0_worst_row = -1;
    double level0_worst_sum = 1.0;
    double repeating_row_residual = 0.0;   ///< max_i |((A_neg + A0 + A1) 1)_i - 1|
    int repeating_worst_row = -1;
    double repeating_worst_sum = 1.0;
    bool phase_irreducible = false;        ///< A_neg + A0 + A1 strongly connected
    bool truncation_irreducible = false;   ///< 3-level truncation of P strongly connected
    std::vector<std::string> warnings;

    bool ok() const
    {
        return entry_violations.empty() && level0_row_residual <= tolerance &&
               repeating_row_residual <= tolerance && phase_irreducible;
    }

    std::vector<std::string> errors() const
    {
        std::vector<std::string> out = entry_violations;
        if (level0_row_residual > tolerance) {
            std::ostringstream os;
            os << "level-0 row " << level0_worst_row << " of B + A1 has row sum " << level0_worst_sum;
            out.push_back(os.str());
        }
        if (repeating_row_residual > tolerance) {
            std::ostringstream os;
            os << "repeating row " << repeating_worst_row << " of A_minus + A0 + A1 has row sum "
               << repeating_worst_sum;
            out.push_back(os.str());
        }
        if (!phase_irreducible) out.emplace_back("A_minus + A0 + A1 is not irreducible");
        return out;
    }
};

namespace detail {

struct RowSumCheck {
    double residual = 0.0;
    int row = -1;
    double sum = 1.0;
};

inline RowSumCheck worst_row_sum(const Matrix& s)
{
    RowSumCheck out;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double sum = s.row(i).sum();
        const double r = std::abs(sum - 1.0);
        if (r > out.residual || out.row < 0) out = {r, static_cast<int>(i), sum};
    }
    return out;
}

} // namespace detail

/// Runs every structural check on the model. Never throws, never mutates.
inline ValidationReport validate(const QbdModel& model, double tol = 1e-12)
{
    ValidationReport rep;
    rep.tolerance = tol;
    const auto m = model.phases();
    const std::pair<const char*, const Matrix*> blocks[] = {
        {"B", &model.b()}, {"A_minus", &model.a_minus()}, {"A0", &model.a0()}, {"A1", &model.a1()}};
    for (const auto& [name, mat] : blocks) {
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) {
                const double v = (*mat)(i, j);
                if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) {
                    std::ostringstream os;
                    os << name << "[" << i << "][" << j << "] = " << v << " is outside [0, 1]";
                    rep.entry_violations.push_back(os.str());
                }
            }
        }
    }
    const auto level0 = detail::worst_row_sum(model.b() + model.a1());
    rep.level0_row_residual = level0.residual;
    rep.level0_worst_row = level0.row;
    rep.level0_worst_sum = level0.sum;
    const auto repeating = detail::worst_row_sum(model.a_minus() + model.a0() + model.a1());
    rep.repeating_row_residual = repeating.residual;
    rep.repeating_worst_row = repeating.row;
    rep.repeating_worst_sum = repeating.sum;

    rep.phase_irreducible = strongly_connected(model.a_minus() + model.a0() + model.a1());

    Matrix trunc = Matrix::Zero(3 * m, 3 * m);
    trunc.block(0, 0, m, m) = model.b();
    trunc.block(0, m, m, m) = model.a1();
    trunc.block(m, 0, m, m) = model.a_minus();
    trunc.block(m, m, m, m) = model.a0();
    trunc.block(m, 2 * m, m, m) = model.a1();
    trunc.block(2 * m, m, m, m) = model.a_minus();
    trunc.block(2 * m, 2 * m, m, m) = model.a0();
    rep.truncation_irreducible = strongly_connected(trunc);
    if (!rep.truncation_irreducible) {
        rep.warnings.emplace_back("3-level truncation of P is not strongly connected (levels not mutually reachable)");
    }
    return rep;
}

namespace detail {

using nlohmann::json;

inline Matrix matrix_from_json(const json& j, Eigen::Index m, const char* name)
{
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != m) {
        throw ValidationError(std::string(name) + " must be an array of " + std::to_string(m) + " rows");
    }
    Matrix out(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m) {
            throw ValidationError(std::string(name) + " row " + std::to_string(i) + " must have " +
                                  std::to_string(m) + " entries");
        }
        for (Eigen::Index c = 0; c < m; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) {
                throw ValidationError(std::string(name) + "[" + std::to_string(i) + "][" + std::to_string(c) +
                                      "] is not a number");
            }
            out(i, c) = v.get<double>();
        }
    }
    return out;
}

inline json matrix_to_json(const Matrix& a)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

inline nlohmann::json vector_to_json(const Vector& v)
{
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

/// Parses a problem document {"m", "B", "A_minus", "A0", "A1", "g"}; only
/// shapes and finiteness are checked.
inline Problem parse_problem(const std::string& document)
{
    using detail::json;
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("parse failure: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("problem document must be a JSON object");
    for (const char* key : {"m", "B", "A_minus", "A0", "A1", "g"}) {
        if (!doc.contains(key)) throw ValidationError(std::string("missing field \"") + key + "\"");
    }
    if (!doc["m"].is_number_integer() || doc["m"].get<long long>() <= 0) {
        throw ValidationError("field \"m\" must be a positive integer");
    }
    const auto m = static_cast<Eigen::Index>(doc["m"].get<long long>());
    QbdModel model(detail::matrix_from_json(doc["B"], m, "B"), detail::matrix_from_json(doc["A_minus"], m, "A_minus"),
                   detail::matrix_from_json(doc["A0"], m, "A0"), detail::matrix_from_json(doc["A1"], m, "A1"));

    const auto& g = doc["g"];
    if (!g.is_array()) throw ValidationError("field \"g\" must be a list of vectors");
    std::vector<Vector> blocks;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto& blk = g[k];
        if (!blk.is_array() || static_cast<Eigen::Index>(blk.size()) != m) {
            throw ValidationError("g[" + std::to_string(k) + "] must have " + std::to_string(m) + " entries");
        }
        Vector v(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& x = blk[static_cast<std::size_t>(i)];
            if (!x.is_number() || !std::isfinite(x.get<double>())) {
                throw ValidationError("g[" + std::to_string(k) + "][" + std::to_string(i) + "] is not a finite number");
            }
            v(i) = x.get<double>();
        }
        blocks.push_back(std::move(v));
    }
    return Problem{std::move(model), RhsSpec(std::move(blocks), m)};
}

/// parse_problem followed by validate(); any failed check is a ValidationError.
inline Problem load_problem(const std::string& document, double tol = 1e-12)
{
    Problem prob = parse_problem(document);
    const auto rep = validate(prob.model, tol);
    if (!rep.ok()) {
        std::string msg = "invalid model:";
        for (const auto& e : rep.errors()) msg += " " + e + ";";
        throw ValidationError(msg);
    }
    return prob;
}

inline std::string serialize_problem(const QbdModel& model, const RhsSpec& rhs)
{
    using detail::json;
    json doc;
    doc["m"] = model.phases();
    doc["B"] = detail::matrix_to_json(model.b());
    doc["A_minus"] = detail::matrix_to_json(model.a_minus());
    doc["A0"] = detail::matrix_to_json(model.a0());
    doc["A1"] = detail::matrix_to_json(model.a1());
    json g = json::array();
    for (const auto& blk : rhs.blocks()) g.push_back(vector_to_json(blk));
    doc["g"] = std::move(g);
    return doc.dump();
}

} // namespace qbd
