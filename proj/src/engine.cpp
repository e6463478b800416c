#include "stackgrid/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "stackgrid/rng.hpp"

namespace stackgrid {

void ScenarioConfig::validate() const {
  if (!(eps1 > 0.0) || !(eps2 > 0.0))
    throw ValidationError("tolerances eps1 and eps2 must be positive");
  if (max_inner_iters <= 0 || max_outer_iters <= 0)
    throw ValidationError("iteration limits must be positive");
  if (noise_std < 0.0) throw ValidationError("noise std must be nonnegative");
  if (microgrids.empty()) throw ValidationError("scenario has no microgrid parameters");
  if (generators.empty()) throw ValidationError("scenario has no generator parameters");
}

PreparedScenario prepare_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  PowerNetwork net = PowerNetwork::build(cfg.network);
  const int nd = net.indexing().n_d;
  const int ng = net.indexing().n_g;

  std::map<int, MicrogridParams> mg_by_bus;
  for (const auto& e : cfg.microgrids)
    if (!mg_by_bus.emplace(e.bus, e.params).second)
      throw ValidationError("duplicate microgrid parameters for bus " + std::to_string(e.bus));
  std::map<int, GeneratorParams> gen_by_bus;
  for (const auto& e : cfg.generators)
    if (!gen_by_bus.emplace(e.bus, e.params).second)
      throw ValidationError("duplicate generator parameters for bus " + std::to_string(e.bus));

  PreparedScenario prep{std::move(net), {}, {}, cfg.market, {}};
  prep.microgrids.reserve(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) {
    const int bus = prep.net.label(i);
    auto it = mg_by_bus.find(bus);
    if (it == mg_by_bus.end())
      throw ValidationError("missing microgrid parameters for bus " + std::to_string(bus));
    MicrogridParams p = it->second;
    p.load_mw = prep.net.loads()(i);  // load lives on the bus entry
    prep.microgrids.push_back(p);
    mg_by_bus.erase(it);
  }
  if (!mg_by_bus.empty())
    throw ValidationError("microgrid parameters reference a non-microgrid bus");
  prep.generators.reserve(static_cast<size_t>(ng));
  for (int j = 0; j < ng; ++j) {
    const int bus = prep.net.label(nd + j);
    auto it = gen_by_bus.find(bus);
    if (it == gen_by_bus.end())
      throw ValidationError("missing generator parameters for bus " + std::to_string(bus));
    prep.generators.push_back(it->second);
    gen_by_bus.erase(it);
  }
  if (!gen_by_bus.empty())
    throw ValidationError("generator parameters reference a non-generator bus");

  prep.reduction = build_reduction(prep.net, prep.microgrids, prep.market);
  return prep;
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::InnerNotConverged: return "inner_not_converged";
    case RunStatus::OuterNotConverged: return "outer_not_converged";
  }
  return "?";
}

namespace {

Eigen::VectorXd stack_state(const Eigen::VectorXd& p_d, const Eigen::VectorXd& p_g) {
  Eigen::VectorXd p(p_d.size() + p_g.size());
  p << p_d, p_g;
  return p;
}

bool strictly_interior(const Eigen::VectorXd& p, const FollowerReduction& red) {
  for (int i = 0; i < p.size(); ++i) {
    const double margin = 1e-9 * (1.0 + std::abs(p(i)));
    if (p(i) <= red.p_min(i) + margin || p(i) >= red.p_max(i) - margin)
      return false;
  }
  return true;
}

double leader_cost(const std::vector<GeneratorParams>& gens,
                   const Eigen::VectorXd& p_gen, const Eigen::VectorXd& theta_g) {
  double total = 0.0;
  for (int j = 0; j < p_gen.size(); ++j) {
    const auto& g = gens[static_cast<size_t>(j)];
    total += 0.5 * g.a * p_gen(j) * p_gen(j) + g.b * p_gen(j) + g.c +
             0.5 * g.alpha * theta_g(j) * theta_g(j);
  }
  return total;
}

}  // namespace

EquilibriumReport run_algorithm1(const ScenarioConfig& cfg) {
  PreparedScenario prep = prepare_scenario(cfg);
  const PowerNetwork& net = prep.net;
  const FollowerReduction& red = prep.reduction;
  const int nd = net.indexing().n_d;
  const int ng = net.indexing().n_g;

  EquilibriumReport rep;
  rep.diag.eq_condition = check_pda_convergence(net, prep.microgrids);

  LeaderSystem sys = build_leader_system(net, prep.generators, red);
  rep.diag.cond_w = sys.cond_w;

  DetRng rng(cfg.seed);
  // documented draw order: follower start, then announced generation
  Eigen::VectorXd p_d0(nd);
  for (int i = 0; i < nd; ++i) p_d0(i) = rng.uniform(red.p_min(i), red.p_max(i));
  Eigen::VectorXd p_g1(ng);
  for (int j = 0; j < ng; ++j)
    p_g1(j) = rng.uniform(0.0, prep.generators[static_cast<size_t>(j)].gen_cap_mw);
  rep.announced_p_g = p_g1;

  // followers respond to the announcement
  rep.follower_initial = run_followers(cfg.follower_scheme, p_d0, p_g1, red, net,
                                       cfg.eps1, cfg.max_inner_iters, rng,
                                       cfg.noise_std);
  rep.inner_steps_initial = rep.follower_initial.steps;
  const Eigen::VectorXd response = rep.follower_initial.p_d;
  if (!rep.follower_initial.converged) {
    rep.status = RunStatus::InnerNotConverged;
    rep.p_d_net = response;
    rep.p_d_gen = response - red.p_min;
    rep.p_g_gen = p_g1;
    rep.theta = net.angles_from_injections(stack_state(response, p_g1));
    rep.diag.warnings.push_back("follower iteration hit the step limit before eps1");
    return rep;
  }

  // one-time information acquisition
  LeaderBlocks blocks{sys.T1, sys.T2};
  switch (cfg.leader_scheme) {
    case LeaderScheme::Kpp: {
      const Eigen::VectorXd gamma = kpp_acquire(prep.microgrids, prep.market, net);
      sys.set_t5(-sys.T2 * gamma.cwiseQuotient(red.s_diag));
      break;
    }
    case LeaderScheme::Kgd: {
      KgdResult kgd = kgd_acquire(p_g1, response, red, net);
      if (!kgd.clamped_components.empty()) {
        std::string which;
        for (int i : kgd.clamped_components)
          which += (which.empty() ? "" : ",") + std::to_string(net.label(i));
        rep.diag.warnings.push_back("response at a box bound on bus " + which +
                                    "; recovered parameters invalid there");
      }
      sys.set_t5(-sys.T2 * kgd.gamma.cwiseQuotient(red.s_diag));
      break;
    }
    case LeaderScheme::Kba: {
      Eigen::VectorXd theta_g =
          net.angles_from_injections(stack_state(response, p_g1)).tail(ng);
      if (cfg.noise_std > 0.0)
        for (int j = 0; j < ng; ++j) theta_g(j) += rng.normal(cfg.noise_std);
      if (!strictly_interior(response, red))
        rep.diag.warnings.push_back(
            "response at a box bound; angle-only inference is biased");
      const Eigen::VectorXd t5_tilde = kba_infer(p_g1, theta_g, blocks, red);
      sys.set_t5(-t5_tilde);
      break;
    }
  }
  rep.diag.t5_tilde = -sys.T5;

  // leader solve: sweeps when the iteration converges, direct otherwise
  SpectralCheck spectral = spectral_radius_check(sys);
  rep.diag.rho_m = spectral.rho;
  rep.diag.gs_convergent = spectral.converges;
  LeaderSolution sol;
  if (spectral.converges) {
    rep.leader_run = gauss_seidel_solve(sys, Eigen::VectorXd::Zero(3 * ng),
                                        cfg.eps2, cfg.max_outer_iters);
    rep.leader_sweeps = rep.leader_run.sweeps;
    if (!rep.leader_run.converged) {
      rep.status = RunStatus::OuterNotConverged;
      rep.diag.warnings.push_back("sweep iteration hit the limit before eps2");
      sol = split_solution(sys, rep.leader_run.x, prep.generators);
    } else {
      sol = split_solution(sys, rep.leader_run.x, prep.generators);
    }
  } else {
    rep.diag.used_direct_fallback = true;
    rep.diag.warnings.push_back(
        "iteration matrix spectral radius >= 1; solved the system directly");
    sol = direct_solve(sys, prep.generators);
  }
  rep.mu = sol.mu;
  rep.diag.caps_ok = sol.all_within_caps;
  if (!sol.all_within_caps)
    rep.diag.warnings.push_back(
        "leader solution violates generation caps; outside the interior regime");

  // announce the equilibrium generation; followers re-converge
  rep.follower_final = run_followers(cfg.follower_scheme, response, sol.p_gen, red,
                                     net, cfg.eps1, cfg.max_inner_iters, rng,
                                     cfg.noise_std);
  rep.inner_steps_final = rep.follower_final.steps;
  if (!rep.follower_final.converged && rep.status == RunStatus::Converged) {
    rep.status = RunStatus::InnerNotConverged;
    rep.diag.warnings.push_back("final follower iteration hit the step limit");
  }

  rep.p_d_net = rep.follower_final.p_d;
  rep.p_d_gen = rep.p_d_net - red.p_min;
  rep.p_g_gen = sol.p_gen;
  rep.theta = net.angles_from_injections(stack_state(rep.p_d_net, rep.p_g_gen));
  rep.diag.follower_interior = strictly_interior(rep.p_d_net, red);

  rep.fixed_point_residual =
      iua_step(rep.p_d_net, rep.p_g_gen, red, net).residual;
  rep.kkt_residual =
      kkt_residuals(net, prep.generators, red, sol.p_gen, sol.mu, sol.theta_g).max();
  rep.diag.acquisition_residual = kba_consistency_residual(
      rep.diag.t5_tilde, rep.p_g_gen, rep.theta.tail(ng), blocks, red);
  if (rep.diag.follower_interior && rep.diag.acquisition_residual > 1e-6)
    rep.diag.warnings.push_back(
        "acquired aggregate inconsistent with the converged state");
  return rep;
}

SeVerification verify_se(const ScenarioConfig& cfg, const EquilibriumReport& report,
                         int n_samples, std::uint64_t seed) {
  PreparedScenario prep = prepare_scenario(cfg);
  const PowerNetwork& net = prep.net;
  const FollowerReduction& red = prep.reduction;
  const int nd = net.indexing().n_d;
  const int ng = net.indexing().n_g;
  constexpr double kTol = 1e-6;

  SeVerification ver;
  ver.samples_per_player = n_samples;
  if (report.status != RunStatus::Converged) {
    ver.applicable = false;
    ver.note = "run did not converge";
    return ver;
  }
  if (!report.diag.caps_ok) {
    ver.applicable = false;
    ver.note = "leader solution outside generation caps; interior reduction "
               "does not model projected strategies";
    return ver;
  }

  DetRng rng(seed);
  const Eigen::VectorXd& p_d = report.p_d_net;
  const Eigen::VectorXd& p_g = report.p_g_gen;

  // (i) no microgrid improves by a unilateral feasible deviation
  for (int i = 0; i < nd; ++i) {
    const auto& mgp = prep.microgrids[static_cast<size_t>(i)];
    const double eq_cost = follower_cost(report.p_d_gen(i), report.theta(i), mgp,
                                         prep.market);
    auto try_deviation = [&](double gen) {
      Eigen::VectorXd p_dev = p_d;
      p_dev(i) = gen - mgp.load_mw;
      const double theta_i =
          net.angles_from_injections(stack_state(p_dev, p_g))(i);
      const double cost = follower_cost(gen, theta_i, mgp, prep.market);
      ++ver.total_samples;
      if (cost < eq_cost - kTol)
        ver.violations.push_back({"microgrid bus " + std::to_string(net.label(i)),
                                  gen, eq_cost - cost});
    };
    try_deviation(0.0);
    try_deviation(mgp.gen_cap_mw);
    for (int k = 0; k < n_samples; ++k)
      try_deviation(rng.uniform(0.0, mgp.gen_cap_mw));
  }

  // (ii) no generator improves, followers re-solved to their response
  const Eigen::VectorXd theta_g_eq = report.theta.tail(ng);
  const double eq_leader_cost = leader_cost(prep.generators, p_g, theta_g_eq);
  for (int j = 0; j < ng; ++j) {
    const auto& gp = prep.generators[static_cast<size_t>(j)];
    auto try_deviation = [&](double gen) {
      Eigen::VectorXd p_g_dev = p_g;
      p_g_dev(j) = gen;
      DirectFollowerSolution resp = solve_followers_direct(net, red, p_g_dev);
      const Eigen::VectorXd theta =
          net.angles_from_injections(stack_state(resp.p_d, p_g_dev));
      const double cost = leader_cost(prep.generators, p_g_dev, theta.tail(ng));
      ++ver.total_samples;
      if (cost < eq_leader_cost - kTol)
        ver.violations.push_back(
            {"generator bus " + std::to_string(net.label(nd + j)), gen,
             eq_leader_cost - cost});
    };
    try_deviation(0.0);
    try_deviation(gp.gen_cap_mw);
    for (int k = 0; k < n_samples; ++k)
      try_deviation(rng.uniform(0.0, gp.gen_cap_mw));
  }

  ver.passed = ver.violations.empty();
  ver.note = ver.passed ? "no improving unilateral deviation found"
                        : std::to_string(ver.violations.size()) + " violations";
  return ver;
}

OracleResult brute_force_follower_nash(const PowerNetwork& net,
                                       const std::vector<MicrogridParams>& microgrids,
                                       const MarketParams& market,
                                       const Eigen::VectorXd& p_g,
                                       double grid_step, int max_rounds) {
  const int nd = net.indexing().n_d;
  if (nd > 4)
    throw ValidationError("grid-search oracle limited to at most 4 microgrids");
  if (!(grid_step > 0.0)) throw ValidationError("grid step must be positive");

  OracleResult out;
  Eigen::VectorXd gen(nd);
  for (int i = 0; i < nd; ++i)
    gen(i) = std::min(microgrids[static_cast<size_t>(i)].load_mw,
                      microgrids[static_cast<size_t>(i)].gen_cap_mw);

  for (int round = 0; round < max_rounds; ++round) {
    ++out.rounds;
    Eigen::VectorXd next(nd);
    for (int i = 0; i < nd; ++i) {
      const auto& mgp = microgrids[static_cast<size_t>(i)];
      // angles from the flow map with microgrid i's injection zeroed out
      Eigen::VectorXd p_probe(nd + p_g.size());
      for (int k = 0; k < nd; ++k)
        p_probe(k) = gen(k) - microgrids[static_cast<size_t>(k)].load_mw;
      p_probe(i) = 0.0;
      p_probe.tail(p_g.size()) = p_g;
      const double theta_base = net.angles_from_injections(p_probe)(i);
      const double self_coeff = net.s(i, i);

      double best_gen = 0.0;
      double best_cost = std::numeric_limits<double>::infinity();
      const int n_points =
          static_cast<int>(std::floor(mgp.gen_cap_mw / grid_step)) + 1;
      for (int k = 0; k < n_points; ++k) {
        const double g = std::min(k * grid_step, mgp.gen_cap_mw);
        const double theta_i = theta_base + self_coeff * (g - mgp.load_mw);
        const double cost = follower_cost(g, theta_i, mgp, market);
        if (cost < best_cost) {
          best_cost = cost;
          best_gen = g;
        }
      }
      // make sure the cap itself is always a candidate
      {
        const double g = mgp.gen_cap_mw;
        const double theta_i = theta_base + self_coeff * (g - mgp.load_mw);
        const double cost = follower_cost(g, theta_i, mgp, market);
        if (cost < best_cost) best_gen = g;
      }
      next(i) = best_gen;
    }
    const double delta = (next - gen).cwiseAbs().maxCoeff();
    gen = next;
    if (delta == 0.0) {
      out.converged = true;
      break;
    }
  }
  out.p_d.resize(nd);
  for (int i = 0; i < nd; ++i)
    out.p_d(i) = gen(i) - microgrids[static_cast<size_t>(i)].load_mw;
  return out;
}

}  // namespace stackgrid
