#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stackgrid/follower.hpp"
#include "stackgrid/leader.hpp"
#include "stackgrid/network.hpp"

namespace stackgrid {

struct MicrogridEntry {
  int bus = 0;
  MicrogridParams params;
};

struct GeneratorEntry {
  int bus = 0;
  GeneratorParams params;
};

struct ScenarioConfig {
  std::string name = "scenario";
  NetworkSpec network;
  std::vector<MicrogridEntry> microgrids;
  std::vector<GeneratorEntry> generators;
  MarketParams market;
  FollowerScheme follower_scheme = FollowerScheme::Pda;
  LeaderScheme leader_scheme = LeaderScheme::Kba;
  double eps1 = 1e-3;
  double eps2 = 1e-3;
  int max_inner_iters = 10000;
  int max_outer_iters = 10000;
  std::uint64_t seed = 1;
  double noise_std = 0.0;
  void validate() const;
};

// Scenario data aligned to the internal bus order.
struct PreparedScenario {
  PowerNetwork net;
  std::vector<MicrogridParams> microgrids;   // internal microgrid order
  std::vector<GeneratorParams> generators;   // internal generator order
  MarketParams market;
  FollowerReduction reduction;
};
PreparedScenario prepare_scenario(const ScenarioConfig& cfg);

enum class RunStatus { Converged, InnerNotConverged, OuterNotConverged };
const char* to_string(RunStatus s);

struct EngineDiagnostics {
  ConvergenceCondition eq_condition;   // measurement-scheme sufficiency check
  double rho_m = 0.0;
  bool gs_convergent = false;
  bool used_direct_fallback = false;
  double cond_w = 0.0;
  Eigen::VectorXd t5_tilde;            // aggregate used to complete the rhs
  double acquisition_residual = 0.0;   // coupling identity residual at the
                                       // final state with the acquired data
  bool caps_ok = false;
  bool follower_interior = false;
  std::vector<std::string> warnings;
};

struct EquilibriumReport {
  RunStatus status = RunStatus::Converged;
  // equilibrium strategies (internal order)
  Eigen::VectorXd p_d_net, p_d_gen, p_g_gen, theta;
  Eigen::VectorXd mu;
  Eigen::VectorXd announced_p_g;
  int inner_steps_initial = 0;
  int leader_sweeps = 0;
  int inner_steps_final = 0;
  double fixed_point_residual = 0.0;   // synchronous-step residual at the result
  double kkt_residual = 0.0;
  EngineDiagnostics diag;
  FollowerRunResult follower_initial, follower_final;
  GaussSeidelResult leader_run;        // empty trace when solved directly
};

// Two-level search: followers converge to the announced generation, the
// leaders acquire their missing aggregate once (per the configured scheme),
// solve the stationarity system by sweeps (direct solve when the iteration
// cannot converge), announce the result, and the followers re-converge.
EquilibriumReport run_algorithm1(const ScenarioConfig& cfg);

struct SeViolation {
  std::string player;
  double deviation_mw = 0.0;
  double cost_gap = 0.0;   // equilibrium cost minus deviated cost (positive = violation)
};

struct SeVerification {
  bool applicable = true;
  bool passed = false;
  int samples_per_player = 0;
  int total_samples = 0;
  std::vector<SeViolation> violations;
  std::string note;
};

// Samples unilateral deviations against both equilibrium conditions:
// (i) each microgrid against the others' equilibrium strategies, and
// (ii) each generator with the followers re-solved to their best response.
// Not applicable when the leader solution violates its caps (the interior
// reduction does not model projected strategies).
SeVerification verify_se(const ScenarioConfig& cfg, const EquilibriumReport& report,
                         int n_samples, std::uint64_t seed);

struct OracleResult {
  Eigen::VectorXd p_d;
  bool converged = false;
  int rounds = 0;
};

// Independent equilibrium oracle: best-response iteration where every
// response is found by exhaustive grid search of the stage cost over
// [0, cap], with the bus angle recomputed through the flow map for every
// candidate. Never touches the closed-form response or the H/q reduction.
OracleResult brute_force_follower_nash(const PowerNetwork& net,
                                       const std::vector<MicrogridParams>& microgrids,
                                       const MarketParams& market,
                                       const Eigen::VectorXd& p_g,
                                       double grid_step = 0.01,
                                       int max_rounds = 200);

}  // namespace stackgrid
