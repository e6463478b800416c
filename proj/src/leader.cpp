#include "stackgrid/leader.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stackgrid {

void GeneratorParams::validate() const {
  if (!(a > 0.0)) throw ValidationError("generator quadratic cost a must be positive");
  if (b < 0.0) throw ValidationError("generator linear cost b must be nonnegative");
  if (c < 0.0) throw ValidationError("generator fixed cost c must be nonnegative");
  if (!(alpha > 0.0)) throw ValidationError("generator alpha must be positive");
  if (gen_cap_mw < 0.0) throw ValidationError("generator cap must be nonnegative");
}

Eigen::MatrixXd LeaderSystem::iteration_matrix() const {
  return D.partialPivLu().solve(D - W);
}

void LeaderSystem::set_t5(const Eigen::VectorXd& t5) {
  if (t5.size() != n_g) throw ValidationError("T5 length mismatch");
  T5 = t5;
  b.tail(n_g) = t5;
}

LeaderBlocks build_T(const PowerNetwork& net, const FollowerReduction& red) {
  const int nd = net.indexing().n_d;
  const int ng = net.indexing().n_g;

  Eigen::PartialPivLU<Eigen::MatrixXd> b1(net.b_dd());
  Eigen::FullPivLU<Eigen::MatrixXd> h(red.H);
  if (!h.isInvertible())
    throw NumericalError("microgrid response matrix H is singular");

  LeaderBlocks blocks;
  const Eigen::MatrixXd b3_b1inv = b1.solve(net.b_gd().transpose()).transpose();
  blocks.T1 = b3_b1inv * net.b_dg() - net.b_gg();
  blocks.T2 = b3_b1inv * h.inverse();

  for (int j = 0; j < ng; ++j)
    if (!(blocks.T1(j, j) > 0.0))
      throw NumericalError("T1 diagonal entry " + std::to_string(j) +
                           " is not positive; network data is inconsistent");
  (void)nd;
  return blocks;
}

LeaderSystem build_leader_system(const PowerNetwork& net,
                                 const std::vector<GeneratorParams>& generators,
                                 const FollowerReduction& red) {
  const int nd = net.indexing().n_d;
  const int ng = net.indexing().n_g;
  if (static_cast<int>(generators.size()) != ng)
    throw ValidationError("expected one generator parameter set per generator bus");
  for (const auto& g : generators) g.validate();

  LeaderBlocks blocks = build_T(net, red);

  LeaderSystem sys;
  sys.n_g = ng;
  sys.T1 = std::move(blocks.T1);
  sys.T2 = std::move(blocks.T2);
  sys.T4 = -sys.T2 * red.gen_ratios;
  sys.T3 = sys.T4.transpose();
  sys.T5 = -sys.T2 * red.upsilon();

  sys.a_diag.resize(ng);
  sys.alpha_diag.resize(ng);
  sys.b_lin.resize(ng);
  for (int j = 0; j < ng; ++j) {
    sys.a_diag(j) = generators[static_cast<size_t>(j)].a;
    sys.alpha_diag(j) = generators[static_cast<size_t>(j)].alpha;
    sys.b_lin(j) = generators[static_cast<size_t>(j)].b;
  }

  const int m = 3 * ng;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(ng, ng);
  sys.W = Eigen::MatrixXd::Zero(m, m);
  sys.W.block(0, 0, ng, ng) = sys.a_diag.asDiagonal();
  sys.W.block(0, ng, ng, ng) = sys.T3 - eye;
  sys.W.block(ng, ng, ng, ng) = sys.T1.transpose();
  sys.W.block(ng, 2 * ng, ng, ng) = sys.alpha_diag.asDiagonal();
  sys.W.block(2 * ng, 0, ng, ng) = sys.T4 - eye;
  sys.W.block(2 * ng, 2 * ng, ng, ng) = sys.T1;

  sys.D = sys.W.triangularView<Eigen::Lower>();

  sys.b.setZero(m);
  sys.b.head(ng) = -sys.b_lin;
  sys.b.tail(ng) = sys.T5;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.W);
  sys.cond_w = svd.singularValues()(0) / svd.singularValues()(m - 1);
  if (!(sys.cond_w < 1e12))
    throw NumericalError("stationarity system W is numerically singular "
                         "(condition estimate " + std::to_string(sys.cond_w) + ")");
  return sys;
}

GaussSeidelResult gauss_seidel_solve(const LeaderSystem& sys, Eigen::VectorXd x0,
                                     double eps2, int max_sweeps) {
  const int ng = sys.n_g;
  const int m = 3 * ng;
  if (x0.size() != m) throw ValidationError("start vector length mismatch");
  for (int i = 0; i < m; ++i)
    if (sys.W(i, i) == 0.0)
      throw NumericalError("zero diagonal entry in W at position " +
                           std::to_string(i) + "; sweep splitting undefined");

  GaussSeidelResult out;
  Eigen::VectorXd x = std::move(x0);

  auto record = [&](int sweep, double dp) {
    LeaderTraceRow row;
    row.sweep = sweep;
    row.p_gen = x.head(ng);
    row.mu = x.segment(ng, ng);
    row.theta_g = x.tail(ng);
    row.residual = dp;
    row.full_residual = (sys.W * x - sys.b).cwiseAbs().maxCoeff();
    out.trace.push_back(std::move(row));
  };
  record(0, 0.0);

  int passes_in_a_row = 0;
  for (int t = 1; t <= max_sweeps; ++t) {
    const Eigen::VectorXd prev = x;
    for (int i = 0; i < m; ++i) {
      double acc = sys.b(i);
      for (int k = 0; k < i; ++k) acc -= sys.W(i, k) * x(k);
      for (int k = i + 1; k < m; ++k) acc -= sys.W(i, k) * x(k);
      x(i) = acc / sys.W(i, i);
    }
    const double dp = (x.head(ng) - prev.head(ng)).cwiseAbs().maxCoeff();
    record(t, dp);
    out.sweeps = t;
    passes_in_a_row = dp <= eps2 ? passes_in_a_row + 1 : 0;
    if (passes_in_a_row >= 2) {
      out.converged = true;
      break;
    }
  }
  out.x = std::move(x);
  return out;
}

SpectralCheck spectral_radius_check(const LeaderSystem& sys) {
  const Eigen::MatrixXd m = sys.iteration_matrix();
  SpectralCheck check;
  if (m.rows() <= 300) {
    check.rho = m.eigenvalues().cwiseAbs().maxCoeff();
  } else {
    // power iteration on M, good to ~1e-6 for the dominant magnitude
    Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows()).normalized();
    double prev = 0.0;
    for (int it = 0; it < 10000; ++it) {
      Eigen::VectorXd w = m * v;
      const double norm = w.norm();
      if (norm == 0.0) {
        prev = 0.0;
        break;
      }
      v = w / norm;
      if (std::abs(norm - prev) <= 1e-6 * std::max(1.0, norm)) {
        prev = norm;
        break;
      }
      prev = norm;
    }
    check.rho = prev;
  }
  check.converges = check.rho < 1.0;
  return check;
}

LeaderSolution split_solution(const LeaderSystem& sys, const Eigen::VectorXd& x,
                              const std::vector<GeneratorParams>& generators) {
  const int ng = sys.n_g;
  LeaderSolution sol;
  sol.p_gen = x.head(ng);
  sol.mu = x.segment(ng, ng);
  sol.theta_g = x.tail(ng);
  sol.within_caps.assign(static_cast<size_t>(ng), 1);
  for (int j = 0; j < ng; ++j) {
    const double cap = generators[static_cast<size_t>(j)].gen_cap_mw;
    if (sol.p_gen(j) < 0.0 || sol.p_gen(j) > cap) {
      sol.within_caps[static_cast<size_t>(j)] = 0;
      sol.all_within_caps = false;
    }
  }
  return sol;
}

LeaderSolution direct_solve(const LeaderSystem& sys,
                            const std::vector<GeneratorParams>& generators) {
  Eigen::VectorXd x = sys.W.partialPivLu().solve(sys.b);
  return split_solution(sys, x, generators);
}

Eigen::VectorXd kpp_acquire(const std::vector<MicrogridParams>& microgrids,
                            const MarketParams& market, const PowerNetwork& net) {
  const int nd = net.indexing().n_d;
  if (static_cast<int>(microgrids.size()) != nd)
    throw ValidationError("expected one microgrid parameter set per microgrid bus");
  Eigen::VectorXd gamma(nd);
  for (int i = 0; i < nd; ++i) {
    const auto& p = microgrids[static_cast<size_t>(i)];
    gamma(i) = (market.zeta - p.psi) / (p.eta * p.eta * net.s(i, i));
  }
  return gamma;
}

KgdResult kgd_acquire(const Eigen::VectorXd& p_g_announced,
                      const Eigen::VectorXd& p_d_response,
                      const FollowerReduction& red, const PowerNetwork& net) {
  const int nd = net.indexing().n_d;
  if (p_d_response.size() != nd)
    throw ValidationError("response vector length mismatch");
  KgdResult out;
  const Eigen::VectorXd q = red.H * p_d_response;
  const Eigen::VectorXd lambda = red.gen_ratios * p_g_announced;
  out.gamma.resize(nd);
  for (int i = 0; i < nd; ++i) {
    out.gamma(i) = red.s_diag(i) * (q(i) + lambda(i));
    const double margin = 1e-9 * (1.0 + std::abs(p_d_response(i)));
    if (p_d_response(i) <= red.p_min(i) + margin ||
        p_d_response(i) >= red.p_max(i) - margin)
      out.clamped_components.push_back(i);
  }
  return out;
}

Eigen::VectorXd kba_infer(const Eigen::VectorXd& p_g_announced,
                          const Eigen::VectorXd& theta_g_measured,
                          const LeaderBlocks& blocks, const FollowerReduction& red) {
  if (theta_g_measured.size() != blocks.T1.rows())
    throw ValidationError("measured angle vector length mismatch");
  const Eigen::VectorXd lambda = red.gen_ratios * p_g_announced;
  return p_g_announced - blocks.T1 * theta_g_measured + blocks.T2 * lambda;
}

double kba_consistency_residual(const Eigen::VectorXd& t5_tilde,
                                const Eigen::VectorXd& p_g,
                                const Eigen::VectorXd& theta_g,
                                const LeaderBlocks& blocks,
                                const FollowerReduction& red) {
  const Eigen::VectorXd lambda = red.gen_ratios * p_g;
  return (blocks.T1 * theta_g + t5_tilde - blocks.T2 * lambda - p_g)
      .cwiseAbs()
      .maxCoeff();
}

double KktResiduals::max() const {
  return std::max({stationarity_p, stationarity_theta, coupling});
}

KktResiduals kkt_residuals(const PowerNetwork& net,
                           const std::vector<GeneratorParams>& generators,
                           const FollowerReduction& red,
                           const Eigen::VectorXd& p_gen, const Eigen::VectorXd& mu,
                           const Eigen::VectorXd& theta_g) {
  const int nd = net.indexing().n_d;
  const int ng = net.indexing().n_g;
  LeaderBlocks blocks = build_T(net, red);

  KktResiduals res;
  for (int j = 0; j < ng; ++j) {
    double coupling_term = 0.0;
    for (int i = 0; i < nd; ++i) {
      const double mu_t2_col = mu.dot(blocks.T2.col(i));
      coupling_term += mu_t2_col * net.s(i, nd + j) / net.s(i, i);
    }
    const auto& g = generators[static_cast<size_t>(j)];
    res.stationarity_p = std::max(
        res.stationarity_p,
        std::abs(g.a * p_gen(j) + g.b - mu(j) - coupling_term));
    res.stationarity_theta = std::max(
        res.stationarity_theta,
        std::abs(g.alpha * theta_g(j) + mu.dot(blocks.T1.col(j))));
  }
  const Eigen::VectorXd coupling =
      blocks.T1 * theta_g + blocks.T2 * red.q(p_gen) - p_gen;
  res.coupling = coupling.cwiseAbs().maxCoeff();
  return res;
}

const char* to_string(LeaderScheme s) {
  switch (s) {
    case LeaderScheme::Kpp: return "kpp";
    case LeaderScheme::Kgd: return "kgd";
    case LeaderScheme::Kba: return "kba";
  }
  return "?";
}

LeaderScheme leader_scheme_from_string(const std::string& s) {
  if (s == "kpp") return LeaderScheme::Kpp;
  if (s == "kgd") return LeaderScheme::Kgd;
  if (s == "kba") return LeaderScheme::Kba;
  throw ValidationError("unknown leader scheme '" + s + "' (expected kpp|kgd|kba)");
}

}  // namespace stackgrid
