#pragma once

#include "qbd/errors.hpp"
#include "qbd/linalg.hpp"
#include "qbd/model.hpp"
#include "qbd/poisson.hpp"
#include "qbd/probabilistic.hpp"
#include "qbd/qme.hpp"
#include "qbd/shift.hpp"
#include "qbd/solver.hpp"
#include "qbd/spectral.hpp"
#include "qbd/triple.hpp"
#include "qbd/verify.hpp"
