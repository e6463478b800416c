#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "stackgrid/network.hpp"
#include "stackgrid/rng.hpp"

namespace stackgrid {

struct MicrogridParams {
  double psi = 0.0;         // unit generation cost, $/MWh
  double eta = 1.0;         // angle-regulation weight
  double load_mw = 0.0;
  double gen_cap_mw = 0.0;
  double tau = 0.5;         // per-step update probability
  void validate() const;
};

struct MarketParams {
  double zeta = 0.0;        // unit market power price, $/MWh
  void validate() const;
};

// Precomputed quantities of the microgrid game in internal bus order.
//
//   gamma_i = (zeta - psi_i) / (eta_i^2 s_ii)
//   H       = [ s_ij / s_ii ]           over microgrid buses
//   G       = [ s_{i,g} / s_ii ]        microgrid rows, generator columns
//   q(Pg)   = gamma_i / s_ii - (G Pg)_i
//
// Net injections live in the box [p_min, p_max] = [-load, cap - load].
struct FollowerReduction {
  Eigen::VectorXd gamma;
  Eigen::MatrixXd H;
  Eigen::MatrixXd gen_ratios;   // G
  Eigen::VectorXd s_diag;
  Eigen::VectorXd p_min;
  Eigen::VectorXd p_max;
  Eigen::VectorXd tau;

  Eigen::VectorXd upsilon() const { return gamma.cwiseQuotient(s_diag); }
  Eigen::VectorXd q(const Eigen::VectorXd& gen_injections) const;
};

FollowerReduction build_reduction(const PowerNetwork& net,
                                  const std::vector<MicrogridParams>& microgrids,
                                  const MarketParams& market);

// Microgrid stage cost: psi*g + zeta*(load - g) + eta^2 theta^2 / 2.
// Throws ValidationError when g lies outside [0, cap].
double follower_cost(double gen_mw, double theta, const MicrogridParams& p,
                     const MarketParams& market);

// Closed-form best response in net-injection space: the clamp of
// (gamma_i - weighted_others) / s_ii onto [p_min, p_max], where
// weighted_others = sum_{j != i} s_ij P_j.
double best_response(double gamma_i, double weighted_others, double s_ii,
                     double p_min, double p_max);

struct FollowerStep {
  Eigen::VectorXd next;                 // net injections after the step
  std::vector<std::uint8_t> updated;    // which microgrids applied the response
  double residual = 0.0;                // ||next - previous||_inf
};

// Synchronous update: every microgrid best-responds to the current state.
FollowerStep iua_step(const Eigen::VectorXd& p_d, const Eigen::VectorXd& p_g,
                      const FollowerReduction& red, const PowerNetwork& net);

// Randomized update: microgrid i applies the response with probability tau_i.
// Draws one Bernoulli per microgrid in bus order.
FollowerStep rua_step(const Eigen::VectorXd& p_d, const Eigen::VectorXd& p_g,
                      const FollowerReduction& red, const PowerNetwork& net,
                      DetRng& rng);

// Measurement-driven update: microgrid i only reads its own bus angle,
//   next_i = clamp( (gamma_i - theta_i + s_ii P_i) / s_ii ),
// applied with probability tau_i. theta_d must be the angles at the
// microgrid buses for the current injections (optionally noise-corrupted).
FollowerStep pda_step(const Eigen::VectorXd& p_d, const Eigen::VectorXd& theta_d,
                      const FollowerReduction& red, DetRng& rng);

// Sufficient condition for almost-sure convergence of the measurement-driven
// scheme: tau_max * max_{i != j} (s_ij / s_ii) * (n_d - 1) < tau_min.
struct ConvergenceCondition {
  double lhs = 0.0;
  double rhs = 0.0;        // tau_min
  double max_ratio = 0.0;  // over microgrid pairs
  bool satisfied = false;
  std::string note;        // sufficiency caveat
};
ConvergenceCondition check_pda_convergence(const PowerNetwork& net,
                                           const std::vector<MicrogridParams>& microgrids);

// Interior equilibrium H P = q solved directly. If any component leaves its
// box, falls back to synchronous best-response iteration to the clamped
// fixed point and reports interior = false.
struct DirectFollowerSolution {
  Eigen::VectorXd p_d;
  bool interior = true;
  bool converged = true;   // fallback iteration status
  int fallback_steps = 0;
};
DirectFollowerSolution solve_followers_direct(const PowerNetwork& net,
                                              const FollowerReduction& red,
                                              const Eigen::VectorXd& p_g,
                                              double eps = 1e-10,
                                              int max_iters = 100000);

enum class FollowerScheme { Iua, Rua, Pda };
const char* to_string(FollowerScheme s);
FollowerScheme follower_scheme_from_string(const std::string& s);

struct FollowerTraceRow {
  int step = 0;
  Eigen::VectorXd p_gen;     // generation (net + load) per microgrid
  Eigen::VectorXd theta_d;   // true bus angles after the step
  std::string updated_mask;  // '1'/'0' per microgrid in bus order
  double residual = 0.0;
};

struct FollowerRunResult {
  Eigen::VectorXd p_d;
  int steps = 0;
  bool converged = false;
  std::vector<FollowerTraceRow> trace;
};

// Runs a scheme until ||P^{n+1} - P^n||_inf <= eps1. For the randomized
// schemes convergence additionally requires every microgrid to have updated
// at least once since the last step that met the norm criterion, so a run
// of all-hold draws is never declared converged.
FollowerRunResult run_followers(FollowerScheme scheme, Eigen::VectorXd p_d0,
                                const Eigen::VectorXd& p_g,
                                const FollowerReduction& red,
                                const PowerNetwork& net, double eps1,
                                int max_iters, DetRng& rng,
                                double noise_std = 0.0);

}  // namespace stackgrid
