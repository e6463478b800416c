#include "stackgrid/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace stackgrid {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw ValidationError(origin + ": " + what);
}

double require_number(const json& j, const char* key, const std::string& origin) {
  if (!j.contains(key) || !j.at(key).is_number())
    fail(origin, std::string("missing or non-numeric field '") + key + "'");
  return j.at(key).get<double>();
}

int require_int(const json& j, const char* key, const std::string& origin) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    fail(origin, std::string("missing or non-integer field '") + key + "'");
  return j.at(key).get<int>();
}

std::string require_string(const json& j, const char* key, const std::string& origin) {
  if (!j.contains(key) || !j.at(key).is_string())
    fail(origin, std::string("missing or non-string field '") + key + "'");
  return j.at(key).get<std::string>();
}

// %.17g: shortest text form that reproduces the double exactly
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ScenarioConfig scenario_from_json(const json& j, const std::string& origin) {
  ScenarioConfig cfg;
  if (!j.is_object()) fail(origin, "top level must be an object");
  cfg.name = j.value("name", std::string("scenario"));

  if (!j.contains("network") || !j.at("network").is_object())
    fail(origin, "missing 'network' object");
  const json& net = j.at("network");
  if (!net.contains("buses") || !net.at("buses").is_array())
    fail(origin, "network.buses must be an array");
  for (const auto& b : net.at("buses")) {
    BusSpec bus;
    bus.id = require_int(b, "id", origin + " network.buses");
    bus.role = bus_role_from_string(require_string(b, "role", origin + " network.buses"));
    bus.load_mw = b.value("load_mw", 0.0);
    cfg.network.buses.push_back(bus);
  }
  cfg.network.slack_id = require_int(net, "slack_id", origin + " network");
  if (!net.contains("branches") || !net.at("branches").is_array())
    fail(origin, "network.branches must be an array");
  for (const auto& br : net.at("branches")) {
    BranchSpec branch;
    branch.from = require_int(br, "from", origin + " network.branches");
    branch.to = require_int(br, "to", origin + " network.branches");
    branch.reactance_pu = require_number(br, "reactance_pu", origin + " network.branches");
    cfg.network.branches.push_back(branch);
  }

  if (!j.contains("market") || !j.at("market").is_object())
    fail(origin, "missing 'market' object");
  cfg.market.zeta = require_number(j.at("market"), "zeta", origin + " market");

  if (!j.contains("microgrids") || !j.at("microgrids").is_array())
    fail(origin, "missing 'microgrids' array");
  for (const auto& m : j.at("microgrids")) {
    MicrogridEntry e;
    e.bus = require_int(m, "bus", origin + " microgrids");
    e.params.psi = require_number(m, "psi", origin + " microgrids");
    e.params.eta = require_number(m, "eta", origin + " microgrids");
    e.params.tau = require_number(m, "tau", origin + " microgrids");
    e.params.gen_cap_mw = require_number(m, "gen_cap_mw", origin + " microgrids");
    cfg.microgrids.push_back(e);
  }

  if (!j.contains("generators") || !j.at("generators").is_array())
    fail(origin, "missing 'generators' array");
  for (const auto& g : j.at("generators")) {
    GeneratorEntry e;
    e.bus = require_int(g, "bus", origin + " generators");
    e.params.a = require_number(g, "a", origin + " generators");
    e.params.b = require_number(g, "b", origin + " generators");
    e.params.c = require_number(g, "c", origin + " generators");
    e.params.alpha = require_number(g, "alpha", origin + " generators");
    e.params.gen_cap_mw = require_number(g, "gen_cap_mw", origin + " generators");
    cfg.generators.push_back(e);
  }

  if (j.contains("run")) {
    const json& run = j.at("run");
    if (run.contains("follower_scheme"))
      cfg.follower_scheme =
          follower_scheme_from_string(run.at("follower_scheme").get<std::string>());
    if (run.contains("leader_scheme"))
      cfg.leader_scheme =
          leader_scheme_from_string(run.at("leader_scheme").get<std::string>());
    cfg.eps1 = run.value("eps1", cfg.eps1);
    cfg.eps2 = run.value("eps2", cfg.eps2);
    cfg.max_inner_iters = run.value("max_inner_iters", cfg.max_inner_iters);
    cfg.max_outer_iters = run.value("max_outer_iters", cfg.max_outer_iters);
    cfg.seed = run.value("seed", cfg.seed);
    cfg.noise_std = run.value("noise_std", cfg.noise_std);
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return scenario_from_json(j, path);
}

nlohmann::ordered_json scenario_to_json(const ScenarioConfig& cfg) {
  nlohmann::ordered_json j;
  j["name"] = cfg.name;
  auto& net = j["network"];
  for (const auto& b : cfg.network.buses)
    net["buses"].push_back({{"id", b.id},
                            {"role", to_string(b.role)},
                            {"load_mw", b.load_mw}});
  net["slack_id"] = cfg.network.slack_id;
  for (const auto& br : cfg.network.branches)
    net["branches"].push_back(
        {{"from", br.from}, {"to", br.to}, {"reactance_pu", br.reactance_pu}});
  j["market"]["zeta"] = cfg.market.zeta;
  for (const auto& m : cfg.microgrids)
    j["microgrids"].push_back({{"bus", m.bus},
                               {"psi", m.params.psi},
                               {"eta", m.params.eta},
                               {"tau", m.params.tau},
                               {"gen_cap_mw", m.params.gen_cap_mw}});
  for (const auto& g : cfg.generators)
    j["generators"].push_back({{"bus", g.bus},
                               {"a", g.params.a},
                               {"b", g.params.b},
                               {"c", g.params.c},
                               {"alpha", g.params.alpha},
                               {"gen_cap_mw", g.params.gen_cap_mw}});
  j["run"] = {{"follower_scheme", to_string(cfg.follower_scheme)},
              {"leader_scheme", to_string(cfg.leader_scheme)},
              {"eps1", cfg.eps1},
              {"eps2", cfg.eps2},
              {"max_inner_iters", cfg.max_inner_iters},
              {"max_outer_iters", cfg.max_outer_iters},
              {"seed", cfg.seed},
              {"noise_std", cfg.noise_std}};
  return j;
}

std::string follower_trace_csv(const FollowerRunResult& run,
                               const std::vector<int>& labels) {
  std::ostringstream os;
  os << "step,scheme";
  for (int id : labels) os << ",pd_gen_bus" << id;
  for (int id : labels) os << ",theta_bus" << id;
  os << ",updated_mask,residual_inf_norm\n";
  for (const auto& row : run.trace) {
    os << row.step << ",follower";
    for (int i = 0; i < row.p_gen.size(); ++i) os << "," << fmt(row.p_gen(i));
    for (int i = 0; i < row.theta_d.size(); ++i) os << "," << fmt(row.theta_d(i));
    os << "," << row.updated_mask << "," << fmt(row.residual) << "\n";
  }
  return os.str();
}

std::string leader_trace_csv(const GaussSeidelResult& run,
                             const std::vector<int>& labels) {
  std::ostringstream os;
  os << "sweep";
  for (int id : labels) os << ",pg_gen_bus" << id;
  for (size_t j = 0; j < labels.size(); ++j) os << ",mu_" << (j + 1);
  for (int id : labels) os << ",theta_bus" << id;
  os << ",residual_inf_norm,full_residual_inf_norm\n";
  for (const auto& row : run.trace) {
    os << row.sweep;
    for (int i = 0; i < row.p_gen.size(); ++i) os << "," << fmt(row.p_gen(i));
    for (int i = 0; i < row.mu.size(); ++i) os << "," << fmt(row.mu(i));
    for (int i = 0; i < row.theta_g.size(); ++i) os << "," << fmt(row.theta_g(i));
    os << "," << fmt(row.residual) << "," << fmt(row.full_residual) << "\n";
  }
  return os.str();
}

namespace {

nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

nlohmann::ordered_json diagnostics_to_json(const EquilibriumReport& rep,
                                           const PowerNetwork& net) {
  nlohmann::ordered_json d;
  d["update_condition"] = {{"lhs", rep.diag.eq_condition.lhs},
                           {"rhs_tau_min", rep.diag.eq_condition.rhs},
                           {"max_coupling_ratio", rep.diag.eq_condition.max_ratio},
                           {"satisfied", rep.diag.eq_condition.satisfied},
                           {"note", rep.diag.eq_condition.note}};
  d["rho_m"] = rep.diag.rho_m;
  d["sweep_iteration_convergent"] = rep.diag.gs_convergent;
  d["used_direct_fallback"] = rep.diag.used_direct_fallback;
  d["cond_w"] = rep.diag.cond_w;
  d["t5_tilde"] = vec_json(rep.diag.t5_tilde);
  d["acquisition_residual"] = rep.diag.acquisition_residual;
  d["caps_ok"] = rep.diag.caps_ok;
  d["follower_interior"] = rep.diag.follower_interior;
  d["network_condition_estimate"] = net.condition_estimate();
  d["warnings"] = rep.diag.warnings;
  return d;
}

nlohmann::ordered_json report_to_json(const ScenarioConfig& cfg,
                                      const EquilibriumReport& rep,
                                      const PowerNetwork& net,
                                      const SeVerification* verification) {
  const int nd = net.indexing().n_d;
  const int ng = net.indexing().n_g;
  nlohmann::ordered_json j;
  j["scenario"] = cfg.name;
  j["follower_scheme"] = to_string(cfg.follower_scheme);
  j["leader_scheme"] = to_string(cfg.leader_scheme);
  j["seed"] = cfg.seed;
  j["status"] = to_string(rep.status);

  nlohmann::ordered_json eq;
  for (int i = 0; i < nd; ++i) {
    eq["microgrids"].push_back(
        {{"bus", net.label(i)},
         {"generation_mw", rep.p_d_gen.size() > i ? rep.p_d_gen(i) : 0.0},
         {"net_injection_mw", rep.p_d_net.size() > i ? rep.p_d_net(i) : 0.0},
         {"direction", rep.p_d_net.size() > i && rep.p_d_net(i) < 0.0
                           ? "buys from grid"
                           : "sells to grid"},
         {"theta_rad", rep.theta.size() > i ? rep.theta(i) : 0.0}});
  }
  for (int jj = 0; jj < ng; ++jj) {
    eq["generators"].push_back(
        {{"bus", net.label(nd + jj)},
         {"generation_mw", rep.p_g_gen.size() > jj ? rep.p_g_gen(jj) : 0.0},
         {"theta_rad", rep.theta.size() > nd + jj ? rep.theta(nd + jj) : 0.0}});
  }
  j["equilibrium"] = eq;

  j["iterations"] = {{"inner_initial", rep.inner_steps_initial},
                     {"leader_sweeps", rep.leader_sweeps},
                     {"inner_final", rep.inner_steps_final}};
  j["announced_p_g"] = vec_json(rep.announced_p_g);
  j["fixed_point_residual"] = rep.fixed_point_residual;
  j["kkt_residual"] = rep.kkt_residual;
  j["diagnostics"] = diagnostics_to_json(rep, net);

  if (verification != nullptr) {
    nlohmann::ordered_json v;
    v["applicable"] = verification->applicable;
    v["passed"] = verification->passed;
    v["samples_per_player"] = verification->samples_per_player;
    v["total_samples"] = verification->total_samples;
    v["note"] = verification->note;
    for (const auto& viol : verification->violations)
      v["violations"].push_back({{"player", viol.player},
                                 {"deviation_mw", viol.deviation_mw},
                                 {"cost_gap", viol.cost_gap}});
    j["se_verification"] = v;
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << content;
}

}  // namespace stackgrid
