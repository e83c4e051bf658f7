#pragma once

// Umbrella header for the accelerated policy optimization library.

#include "accelpo/agents.hpp"
#include "accelpo/bellman.hpp"
#include "accelpo/checks.hpp"
#include "accelpo/core.hpp"
#include "accelpo/harness.hpp"
#include "accelpo/mdp.hpp"
#include "accelpo/optim.hpp"
#include "accelpo/plot.hpp"
#include "accelpo/policy.hpp"
#include "accelpo/updates.hpp"
