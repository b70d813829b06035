#pragma once

#include <cstddef>

#include "gridtune/sim_kernel.hpp"

namespace gridtune {

// Thresholds, periods and switches shared by the agents. Defaults are listed in
// the README; every field is overridable from the run config.
struct AgentParams {
  // detection
  double gain_min = 0.2;         // modelled time reduction needed to tune
  double imbalance_max = 0.5;
  double saturation_min = 0.95;
  int sustain_periods = 3;       // consecutive saturated pull windows
  double heartbeat_timeout = 5.0;
  double overload_min = 0.9;

  // monitoring
  double sample_period = 1.0;
  double pull_period = 1.0;
  std::size_t buffer_capacity = 4096;

  // control
  double min_gain = 0.1;
  double cooldown_window = 10.0;
  int quiesce_periods = 2;
  double transfer_base = 1.0;
  double transfer_per_memory = 0.01;
  bool strict_capacity = false;
  bool restart_migration = false;
  bool tuning_enabled = true;
  bool migration_enabled = true;

  LatencyModel latency;

  double quiesce_window() const { return quiesce_periods * pull_period; }

  bool operator==(const AgentParams&) const = default;
};

}  // namespace gridtune
