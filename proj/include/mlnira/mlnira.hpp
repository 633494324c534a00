#pragma once

// Umbrella header: network estimation from nested binary data plus simulated
// node interventions on the fitted model.

#include "mlnira/core.hpp"
#include "mlnira/csv.hpp"
#include "mlnira/data.hpp"
#include "mlnira/intervention.hpp"
#include "mlnira/network.hpp"
#include "mlnira/regression.hpp"
#include "mlnira/rng.hpp"
#include "mlnira/sampler.hpp"
#include "mlnira/stats.hpp"
#include "mlnira/svg.hpp"
#include "mlnira/synthetic.hpp"
