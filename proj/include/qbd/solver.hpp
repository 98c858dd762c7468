#pragma once

#include "qbd/poisson.hpp"
#include "qbd/shift.hpp"

namespace qbd {

/// Classifies the chain and takes the matching path.
inline PoissonSolution solve(const QbdModel& model, const RhsSpec& g, const QmeSolutions& q,
                             const PoissonOptions& opt = {})
{
    if (q.classification == ChainClass::NullRecurrent) return solve_null_recurrent(model, g, q, opt);
    return solve_poisson(model, g, q, opt);
}

inline PoissonSolution solve(const QbdModel& model, const RhsSpec& g, const PoissonOptions& opt = {})
{
    return solve(model, g, solve_all(model, opt.qme), opt);
}

} // namespace qbd
