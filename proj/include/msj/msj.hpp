#pragma once

// Umbrella header.

#include "msj/analysis/jet.hpp"
#include "msj/analysis/msfq.hpp"
#include "msj/analysis/stability.hpp"
#include "msj/analysis/transforms.hpp"
#include "msj/config.hpp"
#include "msj/errors.hpp"
#include "msj/io.hpp"
#include "msj/metrics.hpp"
#include "msj/policy.hpp"
#include "msj/simulator.hpp"
#include "msj/state.hpp"
#include "msj/workload.hpp"
