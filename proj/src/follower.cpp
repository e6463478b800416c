#include "stackgrid/follower.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stackgrid {

void MicrogridParams::validate() const {
  if (!(tau > 0.0 && tau < 1.0))
    throw ValidationError("microgrid tau must lie in (0, 1)");
  if (!(eta > 0.0)) throw ValidationError("microgrid eta must be positive");
  if (gen_cap_mw < 0.0) throw ValidationError("microgrid generation cap must be nonnegative");
  if (load_mw < 0.0) throw ValidationError("microgrid load must be nonnegative");
}

void MarketParams::validate() const {
  if (zeta < 0.0) throw ValidationError("market price zeta must be nonnegative");
}

Eigen::VectorXd FollowerReduction::q(const Eigen::VectorXd& gen_injections) const {
  if (gen_injections.size() != gen_ratios.cols())
    throw ValidationError("generator injection vector length mismatch");
  return upsilon() - gen_ratios * gen_injections;
}

FollowerReduction build_reduction(const PowerNetwork& net,
                                  const std::vector<MicrogridParams>& microgrids,
                                  const MarketParams& market) {
  const int nd = net.indexing().n_d;
  const int ng = net.indexing().n_g;
  if (static_cast<int>(microgrids.size()) != nd)
    throw ValidationError("expected one microgrid parameter set per microgrid bus");
  market.validate();

  FollowerReduction red;
  red.gamma.resize(nd);
  red.s_diag.resize(nd);
  red.p_min.resize(nd);
  red.p_max.resize(nd);
  red.tau.resize(nd);
  red.H.resize(nd, nd);
  red.gen_ratios.resize(nd, ng);

  for (int i = 0; i < nd; ++i) {
    const MicrogridParams& p = microgrids[static_cast<size_t>(i)];
    p.validate();
    const double sii = net.s(i, i);
    red.s_diag(i) = sii;
    red.gamma(i) = (market.zeta - p.psi) / (p.eta * p.eta * sii);
    red.p_min(i) = -p.load_mw;
    red.p_max(i) = p.gen_cap_mw - p.load_mw;
    red.tau(i) = p.tau;
    for (int j = 0; j < nd; ++j) red.H(i, j) = net.s(i, j) / sii;
    for (int j = 0; j < ng; ++j) red.gen_ratios(i, j) = net.s(i, nd + j) / sii;
  }
  return red;
}

double follower_cost(double gen_mw, double theta, const MicrogridParams& p,
                     const MarketParams& market) {
  if (gen_mw < 0.0 || gen_mw > p.gen_cap_mw)
    throw ValidationError("generation outside [0, cap]");
  return p.psi * gen_mw + market.zeta * (p.load_mw - gen_mw) +
         0.5 * p.eta * p.eta * theta * theta;
}

double best_response(double gamma_i, double weighted_others, double s_ii,
                     double p_min, double p_max) {
  const double unconstrained = (gamma_i - weighted_others) / s_ii;
  return std::min(p_max, std::max(p_min, unconstrained));
}

namespace {

// sum_{j != i} s_ij P_j over every non-slack bus
double weighted_others(const PowerNetwork& net, const Eigen::VectorXd& p_all,
                       int i) {
  return net.injection_to_angle().row(i).dot(p_all) - net.s(i, i) * p_all(i);
}

Eigen::VectorXd stack_state(const Eigen::VectorXd& p_d, const Eigen::VectorXd& p_g) {
  Eigen::VectorXd p(p_d.size() + p_g.size());
  p << p_d, p_g;
  return p;
}

}  // namespace

FollowerStep iua_step(const Eigen::VectorXd& p_d, const Eigen::VectorXd& p_g,
                      const FollowerReduction& red, const PowerNetwork& net) {
  const int nd = static_cast<int>(p_d.size());
  const Eigen::VectorXd p_all = stack_state(p_d, p_g);
  FollowerStep step;
  step.next.resize(nd);
  step.updated.assign(static_cast<size_t>(nd), 1);
  for (int i = 0; i < nd; ++i) {
    step.next(i) = best_response(red.gamma(i), weighted_others(net, p_all, i),
                                 red.s_diag(i), red.p_min(i), red.p_max(i));
  }
  step.residual = (step.next - p_d).cwiseAbs().maxCoeff();
  return step;
}

FollowerStep rua_step(const Eigen::VectorXd& p_d, const Eigen::VectorXd& p_g,
                      const FollowerReduction& red, const PowerNetwork& net,
                      DetRng& rng) {
  const int nd = static_cast<int>(p_d.size());
  const Eigen::VectorXd p_all = stack_state(p_d, p_g);
  FollowerStep step;
  step.next = p_d;
  step.updated.assign(static_cast<size_t>(nd), 0);
  for (int i = 0; i < nd; ++i) {
    if (!rng.bernoulli(red.tau(i))) continue;
    step.updated[static_cast<size_t>(i)] = 1;
    step.next(i) = best_response(red.gamma(i), weighted_others(net, p_all, i),
                                 red.s_diag(i), red.p_min(i), red.p_max(i));
  }
  step.residual = (step.next - p_d).cwiseAbs().maxCoeff();
  return step;
}

FollowerStep pda_step(const Eigen::VectorXd& p_d, const Eigen::VectorXd& theta_d,
                      const FollowerReduction& red, DetRng& rng) {
  const int nd = static_cast<int>(p_d.size());
  if (theta_d.size() != nd)
    throw ValidationError("measured angle vector length mismatch");
  FollowerStep step;
  step.next = p_d;
  step.updated.assign(static_cast<size_t>(nd), 0);
  for (int i = 0; i < nd; ++i) {
    if (!rng.bernoulli(red.tau(i))) continue;
    step.updated[static_cast<size_t>(i)] = 1;
    // theta_i - s_ii P_i equals the weighted sum of all other injections
    const double g_others = theta_d(i) - red.s_diag(i) * p_d(i);
    step.next(i) = best_response(red.gamma(i), g_others, red.s_diag(i),
                                 red.p_min(i), red.p_max(i));
  }
  step.residual = (step.next - p_d).cwiseAbs().maxCoeff();
  return step;
}

ConvergenceCondition check_pda_convergence(const PowerNetwork& net,
                                           const std::vector<MicrogridParams>& microgrids) {
  const int nd = net.indexing().n_d;
  if (static_cast<int>(microgrids.size()) != nd)
    throw ValidationError("expected one microgrid parameter set per microgrid bus");
  ConvergenceCondition cond;
  double tau_min = 1.0, tau_max = 0.0;
  for (const auto& p : microgrids) {
    tau_min = std::min(tau_min, p.tau);
    tau_max = std::max(tau_max, p.tau);
  }
  cond.rhs = tau_min;
  cond.max_ratio = 0.0;
  for (int i = 0; i < nd; ++i)
    for (int j = 0; j < nd; ++j)
      if (i != j) cond.max_ratio = std::max(cond.max_ratio, net.s(i, j) / net.s(i, i));
  cond.lhs = tau_max * cond.max_ratio * static_cast<double>(nd - 1);
  cond.satisfied = cond.lhs < cond.rhs;
  cond.note = cond.satisfied
                  ? "sufficient condition holds"
                  : "sufficient condition fails; divergence is not implied";
  return cond;
}

DirectFollowerSolution solve_followers_direct(const PowerNetwork& net,
                                              const FollowerReduction& red,
                                              const Eigen::VectorXd& p_g,
                                              double eps, int max_iters) {
  DirectFollowerSolution sol;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(red.H);
  const double cond = red.H.cwiseAbs().maxCoeff() > 0
                          ? 1.0 / lu.rcond()
                          : std::numeric_limits<double>::infinity();
  if (!lu.isInvertible() || cond > 1e12)
    throw NumericalError("microgrid response matrix H is numerically singular "
                         "(condition estimate " + std::to_string(cond) +
                         "); network data is inconsistent");
  sol.p_d = lu.solve(red.q(p_g));

  bool inside = true;
  for (int i = 0; i < sol.p_d.size(); ++i)
    if (sol.p_d(i) < red.p_min(i) || sol.p_d(i) > red.p_max(i)) inside = false;
  if (inside) return sol;

  // Clamped fixed point via synchronous best-response iteration.
  sol.interior = false;
  Eigen::VectorXd p = sol.p_d.cwiseMax(red.p_min).cwiseMin(red.p_max);
  for (int it = 0; it < max_iters; ++it) {
    FollowerStep step = iua_step(p, p_g, red, net);
    p = step.next;
    ++sol.fallback_steps;
    if (step.residual <= eps) {
      sol.p_d = p;
      return sol;
    }
  }
  sol.p_d = p;
  sol.converged = false;
  return sol;
}

const char* to_string(FollowerScheme s) {
  switch (s) {
    case FollowerScheme::Iua: return "iua";
    case FollowerScheme::Rua: return "rua";
    case FollowerScheme::Pda: return "pda";
  }
  return "?";
}

FollowerScheme follower_scheme_from_string(const std::string& s) {
  if (s == "iua") return FollowerScheme::Iua;
  if (s == "rua") return FollowerScheme::Rua;
  if (s == "pda") return FollowerScheme::Pda;
  throw ValidationError("unknown follower scheme '" + s + "' (expected iua|rua|pda)");
}

FollowerRunResult run_followers(FollowerScheme scheme, Eigen::VectorXd p_d,
                                const Eigen::VectorXd& p_g,
                                const FollowerReduction& red,
                                const PowerNetwork& net, double eps1,
                                int max_iters, DetRng& rng, double noise_std) {
  const int nd = static_cast<int>(p_d.size());
  FollowerRunResult out;
  out.trace.reserve(64);

  auto record = [&](int step, const Eigen::VectorXd& p,
                    const std::vector<std::uint8_t>& updated, double residual) {
    FollowerTraceRow row;
    row.step = step;
    row.p_gen = p - red.p_min;  // generation = net injection + load
    row.theta_d = net.angles_from_injections(stack_state(p, p_g)).head(nd);
    row.updated_mask.assign(static_cast<size_t>(nd), '0');
    for (int i = 0; i < nd; ++i)
      if (i < static_cast<int>(updated.size()) && updated[static_cast<size_t>(i)])
        row.updated_mask[static_cast<size_t>(i)] = '1';
    row.residual = residual;
    out.trace.push_back(std::move(row));
  };

  record(0, p_d, {}, 0.0);

  std::vector<std::uint8_t> updated_since_pass(static_cast<size_t>(nd), 0);
  const bool randomized = scheme != FollowerScheme::Iua;

  for (int n = 1; n <= max_iters; ++n) {
    FollowerStep step;
    switch (scheme) {
      case FollowerScheme::Iua:
        step = iua_step(p_d, p_g, red, net);
        break;
      case FollowerScheme::Rua:
        step = rua_step(p_d, p_g, red, net, rng);
        break;
      case FollowerScheme::Pda: {
        Eigen::VectorXd full(nd + p_g.size());
        full << p_d, p_g;
        Eigen::VectorXd theta_d = net.angles_from_injections(full).head(nd);
        if (noise_std > 0.0)
          for (int i = 0; i < nd; ++i) theta_d(i) += rng.normal(noise_std);
        step = pda_step(p_d, theta_d, red, rng);
        break;
      }
    }
    p_d = step.next;
    record(n, p_d, step.updated, step.residual);
    out.steps = n;

    for (int i = 0; i < nd; ++i)
      if (step.updated[static_cast<size_t>(i)]) updated_since_pass[static_cast<size_t>(i)] = 1;

    if (step.residual <= eps1) {
      const bool all_updated =
          !randomized ||
          std::all_of(updated_since_pass.begin(), updated_since_pass.end(),
                      [](std::uint8_t u) { return u != 0; });
      if (all_updated) {
        out.converged = true;
        break;
      }
      // criterion met but some microgrids have not moved yet: open a new window
      std::fill(updated_since_pass.begin(), updated_since_pass.end(), 0);
      for (int i = 0; i < nd; ++i)
        if (step.updated[static_cast<size_t>(i)]) updated_since_pass[static_cast<size_t>(i)] = 1;
    }
  }
  out.p_d = p_d;
  return out;
}

}  // namespace stackgrid
