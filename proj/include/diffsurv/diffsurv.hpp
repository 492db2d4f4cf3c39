#pragma once

// Umbrella header: survival models whose hazard is a function of a latent
// diffusion, fitted by Hastings-within-Gibbs MCMC with Brownian-bridge block
// updates.

#include "diffsurv/bayes_factor.hpp"
#include "diffsurv/brownian.hpp"
#include "diffsurv/drift.hpp"
#include "diffsurv/euler.hpp"
#include "diffsurv/girsanov.hpp"
#include "diffsurv/hazard.hpp"
#include "diffsurv/io.hpp"
#include "diffsurv/kaplan_meier.hpp"
#include "diffsurv/lamperti.hpp"
#include "diffsurv/linalg.hpp"
#include "diffsurv/mcmc.hpp"
#include "diffsurv/model.hpp"
#include "diffsurv/path.hpp"
#include "diffsurv/plot.hpp"
#include "diffsurv/prior.hpp"
#include "diffsurv/rng.hpp"
#include "diffsurv/summary.hpp"
#include "diffsurv/survival.hpp"
#include "diffsurv/survival_data.hpp"
#include "diffsurv/time_grid.hpp"
