#pragma once

// Sliced multi-marginal optimal transport toolkit: exact 1D kernels, the
// Monte-Carlo sliced estimator in arbitrary dimension, analytic gradients,
// barycenter and multi-task solvers, trajectory reward shaping, and the
// certification suite.

#include "smw/bench.hpp"
#include "smw/errors.hpp"
#include "smw/gradients.hpp"
#include "smw/measure.hpp"
#include "smw/ot1d.hpp"
#include "smw/rlreward.hpp"
#include "smw/rng.hpp"
#include "smw/slicing.hpp"
#include "smw/solvers.hpp"
#include "smw/verify.hpp"
