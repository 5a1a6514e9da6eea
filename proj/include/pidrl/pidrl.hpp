#pragma once

// Umbrella header for the whole library.

#include "pidrl/analysis.hpp"
#include "pidrl/eigen_solver.hpp"
#include "pidrl/environments.hpp"
#include "pidrl/gain_adaptation.hpp"
#include "pidrl/harness.hpp"
#include "pidrl/learning.hpp"
#include "pidrl/linalg.hpp"
#include "pidrl/mdp.hpp"
#include "pidrl/mdp_io.hpp"
#include "pidrl/planning.hpp"
#include "pidrl/report.hpp"
#include "pidrl/rng.hpp"
