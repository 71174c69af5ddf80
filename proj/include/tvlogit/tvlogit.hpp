#pragma once

// Umbrella header: the full library in dependency order.

#include "errors.hpp"    // exception types
#include "rng.hpp"       // counter-based random streams
#include "model.hpp"     // logistic losses, risks, curvature
#include "tvprox.hpp"    // difference operators, prox, stationarity checks
#include "solver.hpp"    // penalized fit (FISTA with monotone restarts)
#include "theory.hpp"    // jump structures, finite-sample bound quantities
#include "sim.hpp"       // seeded Monte Carlo experiments
