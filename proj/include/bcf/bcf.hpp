#pragma once

// Umbrella header for distributed Bayesian filtering with consensus on
// densities. Covers grid densities and opinion pools, grid Bayes filtering,
// network weights and spectra, consensus rounds and loop planning,
// partial-observer filtering, lossy density communication, and the
// scenario-driven simulator.

#include "bcf/bayes.hpp"
#include "bcf/comm.hpp"
#include "bcf/consensus.hpp"
#include "bcf/density.hpp"
#include "bcf/errors.hpp"
#include "bcf/hierarchy.hpp"
#include "bcf/network.hpp"
#include "bcf/rng.hpp"
#include "bcf/sim/models.hpp"
#include "bcf/sim/runner.hpp"
#include "bcf/sim/scenario.hpp"
