#include "stackgrid/network.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace stackgrid {

const char* to_string(BusRole role) {
  switch (role) {
    case BusRole::Microgrid: return "microgrid";
    case BusRole::Generator: return "generator";
    case BusRole::Slack: return "slack";
  }
  return "?";
}

BusRole bus_role_from_string(const std::string& s) {
  if (s == "microgrid") return BusRole::Microgrid;
  if (s == "generator") return BusRole::Generator;
  if (s == "slack") return BusRole::Slack;
  throw ValidationError("unknown bus role '" + s + "' (expected microgrid|generator|slack)");
}

bool ValidationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const InvariantCheck& c) { return c.passed; });
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.passed ? "PASS" : "FAIL") << "  " << c.name
       << "  residual=" << c.residual;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << "\n";
  }
  return os.str();
}

namespace {

struct Assembly {
  BusIndexing idx;
  std::vector<int> labels;       // internal -> original id
  Eigen::VectorXd loads;
  int slack_label = -1;
  Eigen::MatrixXd b;             // imag part of Y, slack removed
  bool connected = false;
  bool schema_ok = false;
  std::string schema_error;
};

// Schema checks + Laplacian assembly. Does not require reactances to be
// positive or the graph to be connected; those become invariant failures.
Assembly assemble(const NetworkSpec& spec) {
  Assembly out;

  if (spec.buses.empty()) {
    out.schema_error = "no buses";
    return out;
  }
  std::set<int> ids;
  int slack_count = 0;
  for (const auto& b : spec.buses) {
    if (!ids.insert(b.id).second) {
      out.schema_error = "duplicate bus id " + std::to_string(b.id);
      return out;
    }
    if (b.role == BusRole::Slack) ++slack_count;
    if (b.load_mw < 0.0) {
      out.schema_error = "negative load at bus " + std::to_string(b.id);
      return out;
    }
  }
  if (slack_count == 0 || spec.slack_id < 0) {
    out.schema_error = "no slack bus designated";
    return out;
  }
  if (slack_count > 1) {
    out.schema_error = "more than one slack bus";
    return out;
  }
  const BusSpec* slack = nullptr;
  for (const auto& b : spec.buses)
    if (b.role == BusRole::Slack) slack = &b;
  if (slack->id != spec.slack_id) {
    out.schema_error = "slack_id " + std::to_string(spec.slack_id) +
                       " does not match the bus marked slack (" +
                       std::to_string(slack->id) + ")";
    return out;
  }
  for (const auto& br : spec.branches) {
    if (!ids.count(br.from) || !ids.count(br.to)) {
      out.schema_error = "branch " + std::to_string(br.from) + "-" +
                         std::to_string(br.to) + " references an unknown bus";
      return out;
    }
    if (br.from == br.to) {
      out.schema_error = "branch " + std::to_string(br.from) + "-" +
                         std::to_string(br.to) + " is a self loop";
      return out;
    }
    if (br.reactance_pu == 0.0) {
      out.schema_error = "branch " + std::to_string(br.from) + "-" +
                         std::to_string(br.to) + " has zero reactance";
      return out;
    }
  }
  for (const auto& b : spec.buses) {
    if (b.role == BusRole::Generator && b.load_mw != 0.0) {
      out.schema_error = "generator bus " + std::to_string(b.id) +
                         " carries a load; generator-bus loads must be zero";
      return out;
    }
  }
  out.schema_ok = true;

  // Internal ordering: microgrids by ascending id, then generators.
  std::vector<const BusSpec*> mg, gen;
  for (const auto& b : spec.buses) {
    if (b.role == BusRole::Microgrid) mg.push_back(&b);
    else if (b.role == BusRole::Generator) gen.push_back(&b);
  }
  auto by_id = [](const BusSpec* a, const BusSpec* b) { return a->id < b->id; };
  std::sort(mg.begin(), mg.end(), by_id);
  std::sort(gen.begin(), gen.end(), by_id);

  out.idx.n_d = static_cast<int>(mg.size());
  out.idx.n_g = static_cast<int>(gen.size());
  out.slack_label = slack->id;
  if (out.idx.n_d < 1 || out.idx.n_g < 1) {
    out.schema_ok = false;
    out.schema_error = "need at least one microgrid bus and one generator bus";
    return out;
  }

  const int n = out.idx.total();
  out.labels.reserve(static_cast<size_t>(n));
  out.loads.resize(n);
  std::map<int, int> pos;  // original id -> internal index (slack -> n)
  int k = 0;
  for (const auto* b : mg) {
    pos[b->id] = k;
    out.labels.push_back(b->id);
    out.loads(k++) = b->load_mw;
  }
  for (const auto* b : gen) {
    pos[b->id] = k;
    out.labels.push_back(b->id);
    out.loads(k++) = b->load_mw;
  }
  pos[slack->id] = n;

  // Full Laplacian including the slack row/column, weights 1/x.
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (const auto& br : spec.branches) {
    const double w = 1.0 / br.reactance_pu;
    const int i = pos.at(br.from), j = pos.at(br.to);
    lap(i, i) += w;
    lap(j, j) += w;
    lap(i, j) -= w;
    lap(j, i) -= w;
  }
  out.b = -lap.topLeftCorner(n, n);

  // Connectivity over the undirected branch graph.
  std::vector<char> seen(static_cast<size_t>(n) + 1, 0);
  std::vector<int> stack{n};
  seen[static_cast<size_t>(n)] = 1;
  std::vector<std::vector<int>> adj(static_cast<size_t>(n) + 1);
  for (const auto& br : spec.branches) {
    adj[static_cast<size_t>(pos.at(br.from))].push_back(pos.at(br.to));
    adj[static_cast<size_t>(pos.at(br.to))].push_back(pos.at(br.from));
  }
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int u : adj[static_cast<size_t>(v)])
      if (!seen[static_cast<size_t>(u)]) {
        seen[static_cast<size_t>(u)] = 1;
        stack.push_back(u);
      }
  }
  out.connected = std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  return out;
}

constexpr double kCondLimit = 1e12;

// Invariants on the assembled matrices. `have_s` is false when inversion
// failed; the S-dependent checks then report as failed.
void matrix_checks(ValidationReport& rep, const Eigen::MatrixXd& b,
                   const BusIndexing& idx, bool connected, bool have_s,
                   const Eigen::MatrixXd& s, double cond) {
  const int n = idx.total();

  double sym_b = (b - b.transpose()).cwiseAbs().maxCoeff();
  rep.checks.push_back({"susceptance matrix symmetric", sym_b <= 1e-12, sym_b, ""});

  // -B must be a Laplacian: nonpositive off-diagonals of -B
  // (i.e. B_ij >= 0 for i != j) and positive diagonal of -B.
  double worst_off = 0.0;
  double worst_diag = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) worst_off = std::min(worst_off, b(i, j));
    }
    worst_diag = std::max(worst_diag, b(i, i));
  }
  rep.checks.push_back({"reduced Laplacian shape (branch weights nonnegative)",
                        worst_off >= -1e-12 && worst_diag < 0.0,
                        std::max(-worst_off, worst_diag),
                        "off-diagonals of B nonnegative, diagonal negative"});

  rep.checks.push_back({"graph connected (slack reachable from every bus)",
                        connected, connected ? 0.0 : 1.0,
                        connected ? "" : "disconnected graph makes the reduced Laplacian singular"});

  rep.checks.push_back({"system invertible (condition estimate)",
                        have_s && cond < kCondLimit, have_s ? cond : std::numeric_limits<double>::infinity(),
                        "condition estimate limit 1e12"});

  if (have_s) {
    double sym_s = (s - s.transpose()).cwiseAbs().maxCoeff();
    rep.checks.push_back({"S symmetric", sym_s <= 1e-10, sym_s, ""});
    double min_entry = s.minCoeff();
    rep.checks.push_back({"S entrywise nonnegative", min_entry >= -1e-12,
                          std::max(0.0, -min_entry), ""});
    double min_diag = s.diagonal().minCoeff();
    rep.checks.push_back({"S diagonal positive", min_diag > 0.0, min_diag, ""});
    double roundtrip = (-b * (s * Eigen::VectorXd::Ones(n)) - Eigen::VectorXd::Ones(n))
                           .cwiseAbs()
                           .maxCoeff();
    rep.checks.push_back({"flow maps inverse pair (-B S = I probe)",
                          roundtrip <= 1e-9, roundtrip, ""});
  } else {
    rep.checks.push_back({"S symmetric", false, 0.0, "not computed: singular system"});
    rep.checks.push_back({"S entrywise nonnegative", false, 0.0, "not computed: singular system"});
    rep.checks.push_back({"S diagonal positive", false, 0.0, "not computed: singular system"});
  }
}

}  // namespace

PowerNetwork PowerNetwork::build(const NetworkSpec& spec) {
  Assembly a = assemble(spec);
  if (!a.schema_ok) throw ValidationError(a.schema_error);
  if (!a.connected)
    throw ValidationError("disconnected graph: reduced Laplacian is singular");

  const int n = a.idx.total();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(-a.b);  // reduced Laplacian
  if (!lu.isInvertible())
    throw NumericalError("reduced Laplacian is numerically singular");
  Eigen::MatrixXd s = lu.inverse();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.b);
  const double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
  if (!(cond < kCondLimit))
    throw NumericalError("reduced system condition estimate exceeds 1e12");

  PowerNetwork net;
  net.b_ = std::move(a.b);
  net.s_ = std::move(s);
  net.idx_ = a.idx;
  net.labels_ = std::move(a.labels);
  net.loads_ = std::move(a.loads);
  net.slack_label_ = a.slack_label;
  net.cond_ = cond;

  ValidationReport rep = net.validate();
  if (!rep.all_passed())
    throw ValidationError("network invariants violated:\n" + rep.to_text());
  return net;
}

int PowerNetwork::internal_index(int original_id) const {
  for (size_t k = 0; k < labels_.size(); ++k)
    if (labels_[k] == original_id) return static_cast<int>(k);
  throw ValidationError("bus id " + std::to_string(original_id) +
                        " is not part of the reduced network");
}

Eigen::VectorXd PowerNetwork::angles_from_injections(const Eigen::VectorXd& injections) const {
  if (injections.size() != size())
    throw ValidationError("injection vector length mismatch");
  return s_ * injections;
}

Eigen::VectorXd PowerNetwork::injections_from_angles(const Eigen::VectorXd& angles) const {
  if (angles.size() != size())
    throw ValidationError("angle vector length mismatch");
  return -b_ * angles;
}

ValidationReport PowerNetwork::validate() const {
  ValidationReport rep;
  matrix_checks(rep, b_, idx_, true, true, s_, cond_);
  return rep;
}

ValidationReport validate_network(const NetworkSpec& spec) {
  ValidationReport rep;
  Assembly a = assemble(spec);
  rep.checks.push_back({"schema (ids, slack, branches, roles, loads)", a.schema_ok,
                        a.schema_ok ? 0.0 : 1.0, a.schema_error});
  if (!a.schema_ok) return rep;

  bool have_s = false;
  Eigen::MatrixXd s;
  double cond = std::numeric_limits<double>::infinity();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(-a.b);
  if (a.connected && lu.isInvertible()) {
    s = lu.inverse();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.b);
    cond = svd.singularValues()(0) / svd.singularValues()(a.idx.total() - 1);
    have_s = cond < kCondLimit;
  }
  matrix_checks(rep, a.b, a.idx, a.connected, have_s, s, cond);
  return rep;
}

}  // namespace stackgrid
