#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "stackgrid/follower.hpp"
#include "stackgrid/network.hpp"

namespace stackgrid {

struct GeneratorParams {
  double a = 1.0;           // quadratic cost, $/MW^2
  double b = 0.0;           // linear cost, $/MW
  double c = 0.0;           // fixed cost, $
  double alpha = 1.0;       // angle-regulation weight
  double gen_cap_mw = 0.0;
  void validate() const;
};

// The generators' reduced stationarity system W X = b over
// X = [P_g; mu; theta_g], assembled from the grid blocks:
//
//   T1 = B_gd B_dd^{-1} B_dg - B_gg          (n_g x n_g)
//   T2 = B_gd B_dd^{-1} H^{-1}               (n_g x n_d)
//   T4 = -T2 G,  T3 = T4^T                   (G = microgrid/generator s-ratios)
//   T5 = -T2 (gamma_i / s_ii)
//
//   W = [ A1     T3-I   0  ]        b = [ -b_lin ]
//       [ 0      T1^T   A2 ]            [   0    ]
//       [ T4-I   0      T1 ]            [   T5   ]
//
// D is the lower-triangular portion of W (in-place sweep splitting) and the
// iteration matrix is M = D^{-1}(D - W). T5's sign follows the rhs
// convention above; the angle-inferable aggregate is t5_tilde = -T5.
struct LeaderSystem {
  int n_g = 0;
  Eigen::MatrixXd T1, T2, T3, T4;
  Eigen::VectorXd T5;
  Eigen::VectorXd a_diag, alpha_diag, b_lin;
  Eigen::MatrixXd W, D;
  Eigen::VectorXd b;
  double cond_w = 0.0;

  Eigen::MatrixXd iteration_matrix() const;          // M = D^{-1}(D - W)
  void set_t5(const Eigen::VectorXd& t5);            // refreshes b's third block
};

struct LeaderBlocks {
  Eigen::MatrixXd T1, T2;
};

// Builds T1 and T2 and verifies T1 has a strictly positive diagonal.
LeaderBlocks build_T(const PowerNetwork& net, const FollowerReduction& red);

// Full system assembly; T5 is computed from the reduction's gamma
// (private-parameter semantics). Verifies invertibility of W.
LeaderSystem build_leader_system(const PowerNetwork& net,
                                 const std::vector<GeneratorParams>& generators,
                                 const FollowerReduction& red);

struct LeaderTraceRow {
  int sweep = 0;
  Eigen::VectorXd p_gen, mu, theta_g;
  double residual = 0.0;        // generation-block inf-norm change
  double full_residual = 0.0;   // ||W X - b||_inf, diagnostics only
};

struct GaussSeidelResult {
  Eigen::VectorXd x;
  int sweeps = 0;
  bool converged = false;
  std::vector<LeaderTraceRow> trace;
};

// In-place sweeps over i = 1..3 n_g. Stops when the generation block moves
// by no more than eps2 between sweeps, required on two consecutive sweeps
// (from a zero start the block repeats once before any coupling reaches it,
// so a single pass is a false stop on every instance).
GaussSeidelResult gauss_seidel_solve(const LeaderSystem& sys, Eigen::VectorXd x0,
                                     double eps2, int max_sweeps);

struct SpectralCheck {
  double rho = 0.0;
  bool converges = false;
};
// Spectral radius of M, dense eigensolver up to 3 n_g <= 300, power
// iteration beyond that.
SpectralCheck spectral_radius_check(const LeaderSystem& sys);

struct LeaderSolution {
  Eigen::VectorXd p_gen, mu, theta_g;
  std::vector<std::uint8_t> within_caps;
  bool all_within_caps = true;
};

// X = W^{-1} b, split into blocks. Cap violations are reported, not clamped.
LeaderSolution direct_solve(const LeaderSystem& sys,
                            const std::vector<GeneratorParams>& generators);
LeaderSolution split_solution(const LeaderSystem& sys, const Eigen::VectorXd& x,
                              const std::vector<GeneratorParams>& generators);

// --- information schemes -------------------------------------------------

// Parameters disclosed: gamma_i = (zeta - psi_i) / (eta_i^2 s_ii).
Eigen::VectorXd kpp_acquire(const std::vector<MicrogridParams>& microgrids,
                            const MarketParams& market, const PowerNetwork& net);

// Generation decisions disclosed: recover gamma from an interior response
// via q = H P_d, gamma_i = s_ii (q_i + (G P_g)_i). Components of the
// response sitting at a box bound make the recovery invalid there.
struct KgdResult {
  Eigen::VectorXd gamma;
  std::vector<int> clamped_components;  // internal microgrid indices
};
KgdResult kgd_acquire(const Eigen::VectorXd& p_g_announced,
                      const Eigen::VectorXd& p_d_response,
                      const FollowerReduction& red, const PowerNetwork& net);

// Bus angles only: t5_tilde = P_g - T1 theta_g + T2 (G P_g), measured after
// the followers' best response to the announcement.
Eigen::VectorXd kba_infer(const Eigen::VectorXd& p_g_announced,
                          const Eigen::VectorXd& theta_g_measured,
                          const LeaderBlocks& blocks, const FollowerReduction& red);

// Residual of the coupling identity T1 theta_g + t5_tilde - T2 (G P_g) - P_g
// at a measured state; vanishes whenever the inferred aggregate is exact and
// the followers responded at an interior point.
double kba_consistency_residual(const Eigen::VectorXd& t5_tilde,
                                const Eigen::VectorXd& p_g,
                                const Eigen::VectorXd& theta_g,
                                const LeaderBlocks& blocks,
                                const FollowerReduction& red);

// --- independent stationarity residuals ----------------------------------

// Evaluates the three first-order conditions by their per-equation sums
// (never through the assembled W), for cross-checking solutions:
//   r_p:     a_j P_j + b_j - mu_j - sum_i (mu . T2col_i) s_{i,g(j)} / s_ii
//   r_theta: alpha_j theta_j + mu . T1col_j
//   r_c:     T1 theta_g + T2 q - P_g
struct KktResiduals {
  double stationarity_p = 0.0;
  double stationarity_theta = 0.0;
  double coupling = 0.0;
  double max() const;
};
KktResiduals kkt_residuals(const PowerNetwork& net,
                           const std::vector<GeneratorParams>& generators,
                           const FollowerReduction& red,
                           const Eigen::VectorXd& p_gen, const Eigen::VectorXd& mu,
                           const Eigen::VectorXd& theta_g);

enum class LeaderScheme { Kpp, Kgd, Kba };
const char* to_string(LeaderScheme s);
LeaderScheme leader_scheme_from_string(const std::string& s);

}  // namespace stackgrid
