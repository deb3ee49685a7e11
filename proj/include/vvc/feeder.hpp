#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vvc::feeder {

enum class DeviceKind { Regulator, Oltc, Capacitor };

struct Bus {
  int id = 0;            // external id; substation is id 0
  double load_p = 0.0;   // kW
  double load_q = 0.0;   // kVar
  double cap_kvar = 0.0; // capacitor rating, 0 = none
};

struct Branch {
  int from = 0;  // internal bus index, oriented root -> leaf
  int to = 0;
  double r = 0.0;  // per-unit on system base
  double x = 0.0;
  int oltc_device = -1;  // index into FeederModel::devices, -1 = plain branch
};

struct TapDevice {
  std::string name;
  DeviceKind kind = DeviceKind::Regulator;
  int bus = -1;     // internal index (regulator / capacitor)
  int branch = -1;  // internal index (oltc)
  int tap_min = 0;
  int tap_max = 0;
  double step = 0.0;  // ratio step for regulator/oltc, rating kVar for capacitor
};

struct FeederModel {
  double s_base_kva = 0.0;
  double v_base_kv = 0.0;
  std::vector<Bus> buses;       // buses[0] is the substation
  std::vector<Branch> branches;
  std::vector<TapDevice> devices;

  // Derived tree structure, filled by load_feeder / finalize().
  std::vector<int> topo_order;      // branch indices ordered root-outward
  std::vector<int> parent_branch;   // per bus index, -1 for substation
  std::vector<std::vector<int>> child_branches;  // per bus index

  int bus_count() const { return static_cast<int>(buses.size()); }
  int branch_count() const { return static_cast<int>(branches.size()); }
  int device_count() const { return static_cast<int>(devices.size()); }

  int bus_index(int external_id) const;
  double nominal_load_p() const;  // total kW over all buses

  // Validates invariants and computes the derived structure. Throws
  // std::runtime_error with a description on any violation.
  void finalize();
};

struct PowerFlowSolution {
  Eigen::VectorXd v;              // per bus voltage magnitude, p.u.
  Eigen::VectorXd branch_p_kw;    // sending-end real flow
  Eigen::VectorXd branch_q_kvar;  // sending-end reactive flow
  Eigen::VectorXd branch_l;       // squared current, p.u.
  Eigen::VectorXd branch_loss_kw; // r * l on system base
  bool converged = false;
  int iterations = 0;
};

struct BranchLosses {
  Eigen::VectorXd per_branch_kw;
  double total_kw = 0.0;
};

class PowerFlowError : public std::runtime_error {
 public:
  PowerFlowError(const std::string& what, double last_mismatch)
      : std::runtime_error(what), last_mismatch(last_mismatch) {}
  double last_mismatch;
};

// Tap-device primitives.
double regulator_voltage(int tap);                     // 1 + 0.005 * tap, tap in [-10, 10]
double capacitor_injection(int status, double rating_kvar, double v_pu);
double oltc_ratio(int tap, double step);

// DistFlow backward/forward sweep over the tree. `taps` is indexed by
// device order; `load_p_kw` / `load_q_kvar` by non-substation bus order
// (internal index - 1). Capacitor injection tracks the solved voltage.
PowerFlowSolution solve_power_flow(const FeederModel& feeder,
                                   const Eigen::VectorXi& taps,
                                   const Eigen::VectorXd& load_p_kw,
                                   const Eigen::VectorXd& load_q_kvar,
                                   double tol = 1e-8, int max_iter = 200);

BranchLosses total_and_per_branch_losses(const PowerFlowSolution& sol);

FeederModel load_feeder(const std::string& path);

}  // namespace vvc::feeder
