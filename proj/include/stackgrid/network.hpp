#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stackgrid/errors.hpp"

namespace stackgrid {

enum class BusRole { Microgrid, Generator, Slack };

const char* to_string(BusRole role);
BusRole bus_role_from_string(const std::string& s);

struct BusSpec {
  int id = 0;
  BusRole role = BusRole::Microgrid;
  double load_mw = 0.0;
};

struct BranchSpec {
  int from = 0;
  int to = 0;
  double reactance_pu = 0.0;
};

// Raw network description as read from a scenario file.
struct NetworkSpec {
  std::vector<BusSpec> buses;
  int slack_id = -1;
  std::vector<BranchSpec> branches;
};

// Internal bus ordering: microgrid buses first (0..n_d-1), generator buses
// after (n_d..n_d+n_g-1), slack excluded from all matrices.
struct BusIndexing {
  int n_d = 0;
  int n_g = 0;
  int total() const { return n_d + n_g; }
};

struct InvariantCheck {
  std::string name;
  bool passed = false;
  double residual = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<InvariantCheck> checks;
  bool all_passed() const;
  std::string to_text() const;
};

// DC flow model of the reduced (slack-deleted) grid.
//
//   P = -B theta,   theta = S P,   S = -B^{-1}
//
// B is the imaginary part of the bus admittance matrix without the slack
// row/column; -B is the reduced Laplacian with branch weights 1/x.
// Injections are in MW, reactances in p.u., angles in radians.
// Immutable after construction; safe to share across threads.
class PowerNetwork {
 public:
  // Validates the description, reorders buses (microgrids first), builds
  // B and S and checks all structural invariants. Throws ValidationError
  // on bad input and NumericalError on a singular/ill-conditioned system.
  static PowerNetwork build(const NetworkSpec& spec);

  const BusIndexing& indexing() const { return idx_; }
  int size() const { return idx_.total(); }

  const Eigen::MatrixXd& susceptance() const { return b_; }
  const Eigen::MatrixXd& injection_to_angle() const { return s_; }
  double s(int i, int j) const { return s_(i, j); }

  // Blocks of B in the internal ordering: dd | dg / gd | gg.
  Eigen::MatrixXd b_dd() const { return b_.topLeftCorner(idx_.n_d, idx_.n_d); }
  Eigen::MatrixXd b_dg() const { return b_.topRightCorner(idx_.n_d, idx_.n_g); }
  Eigen::MatrixXd b_gd() const { return b_.bottomLeftCorner(idx_.n_g, idx_.n_d); }
  Eigen::MatrixXd b_gg() const { return b_.bottomRightCorner(idx_.n_g, idx_.n_g); }

  // Original bus id for an internal index, and the reverse lookup.
  int label(int internal) const { return labels_[static_cast<size_t>(internal)]; }
  int internal_index(int original_id) const;
  int slack_label() const { return slack_label_; }

  // Loads (MW) per internal bus; generator buses carry zero load.
  const Eigen::VectorXd& loads() const { return loads_; }

  // theta = S P
  Eigen::VectorXd angles_from_injections(const Eigen::VectorXd& injections) const;
  // P = -B theta
  Eigen::VectorXd injections_from_angles(const Eigen::VectorXd& angles) const;

  double condition_estimate() const { return cond_; }

  // Re-runs the structural invariants on the built matrices.
  ValidationReport validate() const;

 private:
  PowerNetwork() = default;

  Eigen::MatrixXd b_, s_;
  BusIndexing idx_;
  std::vector<int> labels_;
  Eigen::VectorXd loads_;
  int slack_label_ = -1;
  double cond_ = 0.0;
};

// Non-throwing structural validation of a description: schema checks,
// connectivity, Laplacian shape, and the S-matrix invariants when the
// system is invertible. Used by the CLI `validate` subcommand.
ValidationReport validate_network(const NetworkSpec& spec);

}  // namespace stackgrid
