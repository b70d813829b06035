#pragma once

#include "gridtune/analysis_agents.hpp"
#include "gridtune/control.hpp"
#include "gridtune/error.hpp"
#include "gridtune/grid_model.hpp"
#include "gridtune/monitoring.hpp"
#include "gridtune/params.hpp"
#include "gridtune/protocol.hpp"
#include "gridtune/reporting.hpp"
#include "gridtune/scenarios.hpp"
#include "gridtune/sim_kernel.hpp"
#include "gridtune/sim_spec.hpp"
#include "gridtune/simulation.hpp"
