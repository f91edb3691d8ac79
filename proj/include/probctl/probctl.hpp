#pragma once

// Umbrella header for the probabilistic control toolkit: mixture-density
// forward models and inverse controllers, the uncertainty-minimizing control
// law, the closed-loop stability monitor, the benchmark plants, and the
// simulation harness.

#include "probctl/baseline.hpp"
#include "probctl/config.hpp"
#include "probctl/control.hpp"
#include "probctl/harness.hpp"
#include "probctl/mixture.hpp"
#include "probctl/models.hpp"
#include "probctl/network.hpp"
#include "probctl/plants.hpp"
#include "probctl/plots.hpp"
#include "probctl/rng.hpp"
#include "probctl/scg.hpp"
#include "probctl/snapshot.hpp"
#include "probctl/stability.hpp"
#include "probctl/trace.hpp"
